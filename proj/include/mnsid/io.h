#pragma once

#include "mnsid/identifiability.h"
#include "mnsid/mals.h"
#include "mnsid/system_model.h"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace mnsid {

using json = nlohmann::json;

// Malformed or inconsistent user input (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A checked experiment invariant did not hold (CLI exit code 3).
struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrices are nested row-major arrays; vectors are written as single-column
// matrices and read from either that or a flat array.
json to_json(const Matrix& M);
Matrix matrix_from_json(const json& j, const std::string& what);
Vector vector_from_json(const json& j, const std::string& what);

json to_json(const InputSchedule& s);
InputSchedule schedule_from_json(const json& j);

json to_json(const RolloutSet& set);
RolloutSet rollouts_from_json(const json& j);

// {A, B, noise: "zero" | {Sigma_A, Sigma_B, law}}
json to_json(const MultNoiseSystem& sys);
MultNoiseSystem system_from_json(const json& j);

json to_json(const EstimationResult& r);
json to_json(const EquivalenceClass& ec);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// Text table with a header row. Numbers go through format_double so identical
// inputs give identical bytes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  Index column(const std::string& name) const;  // throws ConfigError if absent
  double number(std::size_t row, const std::string& name) const;
};

std::string format_double(double v);  // %.17g, with inf / -inf / nan spelled out
double parse_double(const std::string& s);

void write_csv(const std::string& path, const CsvTable& t);
CsvTable read_csv(const std::string& path);

CsvTable trajectory_csv(const MomentTrajectory& tr, Index n);

void ensure_directory(const std::string& dir);

}  // namespace mnsid
