#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ein/expr.hpp"

namespace ein {

enum class TypeErrorCode { UnboundParam, UnboundIndex, ArityMismatch, BoundMismatch, DuplicateIndex, KindMismatch, DimMismatch };

const char* typeErrorName(TypeErrorCode c);

class TypeError : public std::runtime_error {
 public:
  TypeError(TypeErrorCode code, Path path, const std::string& message);
  TypeErrorCode code;
  Path path;
  std::string message;
};

std::string printType(const EinType& t);

void checkEnvOk(const TypeEnv& gamma, const IndexCtx& sigma);
void checkMultiIndex(const IndexCtx& sigma, const MultiIndex& alpha, const std::vector<int>& dims, const Path& path = {});

EinType inferType(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e);
std::optional<TypeError> typeError(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e);
bool wellTyped(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e);

// Context seen by child k of e when e sits under sigma.
IndexCtx childContext(const IndexCtx& sigma, const Expr& e, int k);

// Index variables the value of e depends on; empty means scalar.
std::set<std::string> indexSupport(const Expr& e);
bool isScalar(const Expr& e);

struct SubtermTyping {
  int child = 0;
  IndexCtx context;
  std::optional<EinType> type;  // absent for the probe point
  bool scalar = false;
};

std::vector<SubtermTyping> invertType(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, const EinType& tau);

}  // namespace ein
