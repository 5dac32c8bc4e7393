#pragma once

#include <json.hpp>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ein/expr.hpp"

namespace ein {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// {"node": kind, "children": [...], "attrs": {...}}
Json toDocument(const Expr& e);
Expr fromDocument(const Json& doc);

struct Env {
  TypeEnv gamma;
  IndexCtx sigma;
};

// tensor T : TEN[3,3]; field F : FLD_2[3]; image V : IMG_2[]; kernel H : KRN; index i : 3;
Env parseEnv(const std::string& text);
std::string printEnv(const Env& env);
std::string printSurfaceType(const SurfaceType& t);

struct TensorData {
  std::vector<int> shape;
  std::vector<Rational> data;  // row-major
};

using DataEnv = std::map<std::string, TensorData>;

// {"tensors": {"T": {"shape": [3], "data": [...]}}}
DataEnv parseData(const std::string& text);
Json dataToDocument(const DataEnv& data);

std::string readInput(const std::string& path);  // "-" reads stdin

}  // namespace ein
