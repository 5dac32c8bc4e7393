#pragma once

#include <string>

#include "ein/document.hpp"
#include "ein/syntax.hpp"
#include "ein/typecheck.hpp"

namespace testenv {

inline const ein::Env& env() {
  static ein::Env e = ein::parseEnv(
      "tensor S : TEN[]; tensor T : TEN[3]; tensor X : TEN[3]; tensor M : TEN[3,3];"
      "field F : FLD_3[]; field G : FLD_3[]; field U : FLD_3[3];"
      "image V : IMG_3[]; kernel H : KRN;"
      "index i : 3; index j : 3; index k : 3;");
  return e;
}

inline ein::Expr ex(const std::string& s) { return ein::parse(s, &env().gamma); }

}  // namespace testenv
