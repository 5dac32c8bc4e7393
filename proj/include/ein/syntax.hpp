#pragma once

#include <stdexcept>
#include <string>

#include "ein/expr.hpp"

namespace ein {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg);
  int line, col;
};

// Names bound to FLD in env parse as FieldVar, everything else as TensorVar.
Expr parse(const std::string& text, const TypeEnv* env = nullptr);
std::string print(const Expr& e);
std::string printIndex(const IndexTerm& t);
std::string printRational(const Rational& q);

}  // namespace ein
