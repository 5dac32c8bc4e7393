#include "ein/document.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ein/syntax.hpp"

namespace ein {

namespace {

Json indexDoc(const MultiIndex& m) {
  Json a = Json::array();
  for (auto& t : m) {
    if (t.isVar())
      a.push_back(t.var);
    else
      a.push_back(t.value);
  }
  return a;
}

MultiIndex indexFrom(const Json& a) {
  MultiIndex m;
  for (auto& t : a) {
    if (t.is_string())
      m.push_back(IndexTerm::v(t.get<std::string>()));
    else if (t.is_number_integer() && t.get<int>() >= 1)
      m.push_back(IndexTerm::c(t.get<int>()));
    else
      throw FormatError("bad index term " + t.dump());
  }
  return m;
}

}  // namespace

Json toDocument(const Expr& e) {
  Json doc;
  doc["node"] = opName(e->op);
  Json kids = Json::array();
  for (auto& k : e->kids) kids.push_back(toDocument(k));
  doc["children"] = kids;
  Json attrs = Json::object();
  switch (e->op) {
    case Op::Const:
      attrs["value"] = e->value.get_str();
      break;
    case Op::Tensor:
    case Op::Field:
      attrs["name"] = e->name;
      attrs["index"] = indexDoc(e->alpha);
      break;
    case Op::Conv:
      attrs["image"] = e->name;
      attrs["index"] = indexDoc(e->alpha);
      attrs["kernel"] = e->kernel;
      attrs["deriv"] = indexDoc(e->beta);
      break;
    case Op::Delta:
    case Op::Eps:
    case Op::Partial:
      attrs["index"] = indexDoc(e->alpha);
      break;
    case Op::Sum:
      attrs["binder"] = e->name;
      attrs["bound"] = e->n;
      break;
    case Op::Lift:
      attrs["dim"] = e->n;
      break;
    case Op::Pow:
      attrs["exponent"] = e->n;
      break;
    default:
      break;
  }
  doc["attrs"] = attrs;
  return doc;
}

Expr fromDocument(const Json& doc) {
  try {
    auto op = opFromName(doc.at("node").get<std::string>());
    if (!op) throw FormatError("unknown node kind " + doc.at("node").dump());
    std::vector<Expr> kids;
    for (auto& k : doc.at("children")) kids.push_back(fromDocument(k));
    const Json& a = doc.at("attrs");
    auto arity = [&](size_t n) {
      if (kids.size() != n) throw FormatError(std::string("wrong child count for ") + opName(*op));
    };
    switch (*op) {
      case Op::Const: {
        arity(0);
        Rational q(a.at("value").get<std::string>());
        q.canonicalize();
        return cst(q);
      }
      case Op::Tensor:
        arity(0);
        return ten(a.at("name").get<std::string>(), indexFrom(a.at("index")));
      case Op::Field:
        arity(0);
        return fld(a.at("name").get<std::string>(), indexFrom(a.at("index")));
      case Op::Conv:
        arity(0);
        return conv(a.at("image").get<std::string>(), indexFrom(a.at("index")), a.at("kernel").get<std::string>(),
                    indexFrom(a.at("deriv")));
      case Op::Delta: {
        arity(0);
        auto m = indexFrom(a.at("index"));
        if (m.size() != 2) throw FormatError("delta needs two indices");
        return delta(m[0], m[1]);
      }
      case Op::Eps:
        arity(0);
        return eps(indexFrom(a.at("index")));
      case Op::Sum:
        arity(1);
        return sum(a.at("binder").get<std::string>(), a.at("bound").get<int>(), kids[0]);
      case Op::Partial:
        arity(1);
        return partial(indexFrom(a.at("index")), kids[0]);
      case Op::Probe:
        arity(2);
        return probe(kids[0], kids[1]);
      case Op::Lift:
        arity(1);
        return lift(a.at("dim").get<int>(), kids[0]);
      case Op::Pow:
        arity(1);
        return pow(kids[0], a.at("exponent").get<int>());
      default:
        if (isUnary(*op)) {
          arity(1);
          return unary(*op, kids[0]);
        }
        arity(2);
        return binary(*op, kids[0], kids[1]);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed document: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw FormatError(ex.what());
  }
}

std::string printSurfaceType(const SurfaceType& t) {
  std::string dims = "[";
  for (size_t k = 0; k < t.shape.size(); ++k) {
    if (k) dims += ",";
    dims += std::to_string(t.shape[k]);
  }
  dims += "]";
  switch (t.kind) {
    case ParamKind::Ten:
      return "TEN" + dims;
    case ParamKind::Fld:
      return "FLD_" + std::to_string(t.dim) + dims;
    case ParamKind::Img:
      return "IMG_" + std::to_string(t.dim) + dims;
    case ParamKind::Krn:
      return "KRN";
  }
  return "?";
}

namespace {

class EnvReader {
 public:
  explicit EnvReader(const std::string& s) : s_(s) {}

  Env run() {
    Env env;
    for (;;) {
      skip();
      if (k_ >= s_.size()) break;
      int line = line_;
      std::string what = word();
      std::string name = word();
      if (name.empty()) fail(line, "expected a name after '" + what + "'");
      expect(':');
      if (what == "index") {
        int n = number();
        if (n < 1) fail(line, "index bound must be >= 1");
        if (env.sigma.contains(name)) fail(line, "duplicate index '" + name + "'");
        env.sigma.push(name, n);
      } else {
        SurfaceType t = type(line);
        const char* expectKind = what == "tensor"  ? "TEN"
                                 : what == "field" ? "FLD"
                                 : what == "image" ? "IMG"
                                 : what == "kernel" ? "KRN"
                                                    : nullptr;
        if (!expectKind) fail(line, "unknown declaration '" + what + "'");
        std::string got = printSurfaceType(t).substr(0, 3);
        if (got != expectKind) fail(line, "'" + what + "' declared with type " + printSurfaceType(t));
        if (env.gamma.count(name)) fail(line, "duplicate parameter '" + name + "'");
        env.gamma[name] = t;
      }
      expect(';');
    }
    return env;
  }

 private:
  const std::string& s_;
  size_t k_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(int line, const std::string& msg) {
    throw FormatError("env line " + std::to_string(line) + ": " + msg);
  }

  void skip() {
    while (k_ < s_.size()) {
      if (s_[k_] == '#') {
        while (k_ < s_.size() && s_[k_] != '\n') ++k_;
      } else if (std::isspace(static_cast<unsigned char>(s_[k_]))) {
        if (s_[k_] == '\n') ++line_;
        ++k_;
      } else {
        break;
      }
    }
  }

  std::string word() {
    skip();
    size_t b = k_;
    while (k_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[k_])) || s_[k_] == '_')) ++k_;
    return s_.substr(b, k_ - b);
  }

  void expect(char c) {
    skip();
    if (k_ >= s_.size() || s_[k_] != c) fail(line_, std::string("expected '") + c + "'");
    ++k_;
  }

  int number() {
    skip();
    size_t b = k_;
    while (k_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k_]))) ++k_;
    if (b == k_) fail(line_, "expected a number");
    return std::stoi(s_.substr(b, k_ - b));
  }

  SurfaceType type(int line) {
    std::string w = word();
    SurfaceType t;
    if (w == "KRN") {
      t.kind = ParamKind::Krn;
      return t;
    }
    if (w == "TEN") {
      t.kind = ParamKind::Ten;
    } else if (w.rfind("FLD_", 0) == 0 || w.rfind("IMG_", 0) == 0) {
      t.kind = w[0] == 'F' ? ParamKind::Fld : ParamKind::Img;
      std::string d = w.substr(4);
      if (d.empty() || d.find_first_not_of("0123456789") != std::string::npos) fail(line, "bad dimension in " + w);
      t.dim = std::stoi(d);
      if (t.dim < 1) fail(line, "dimension must be >= 1");
    } else {
      fail(line, "unknown type '" + w + "'");
    }
    expect('[');
    skip();
    if (k_ < s_.size() && s_[k_] == ']') {
      ++k_;
      return t;
    }
    for (;;) {
      int n = number();
      if (n < 1) fail(line, "shape extents must be >= 1");
      t.shape.push_back(n);
      skip();
      if (k_ < s_.size() && s_[k_] == ',') {
        ++k_;
        continue;
      }
      expect(']');
      return t;
    }
  }
};

const char* declWord(ParamKind k) {
  switch (k) {
    case ParamKind::Ten:
      return "tensor";
    case ParamKind::Fld:
      return "field";
    case ParamKind::Img:
      return "image";
    case ParamKind::Krn:
      return "kernel";
  }
  return "?";
}

Rational jsonRational(const Json& v) {
  if (v.is_number_integer()) return Rational(mpz_class(v.dump()));
  if (v.is_number_float()) return Rational(v.get<double>());
  if (v.is_string()) {
    Rational q(v.get<std::string>());
    q.canonicalize();
    return q;
  }
  throw FormatError("data values must be numbers, got " + v.dump());
}

void flatten(const Json& v, const std::vector<int>& shape, size_t axis, std::vector<Rational>& out) {
  if (axis == shape.size()) {
    if (v.is_array()) throw FormatError("data nesting deeper than shape");
    out.push_back(jsonRational(v));
    return;
  }
  if (!v.is_array() || static_cast<int>(v.size()) != shape[axis]) throw FormatError("data does not match shape");
  for (auto& x : v) flatten(x, shape, axis + 1, out);
}

}  // namespace

Env parseEnv(const std::string& text) { return EnvReader(text).run(); }

std::string printEnv(const Env& env) {
  std::ostringstream os;
  for (auto& [name, t] : env.gamma) os << declWord(t.kind) << " " << name << " : " << printSurfaceType(t) << ";\n";
  for (auto& [name, n] : env.sigma.entries()) os << "index " << name << " : " << n << ";\n";
  return os.str();
}

DataEnv parseData(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("data file: ") + ex.what());
  }
  if (!doc.is_object() || !doc.contains("tensors") || !doc["tensors"].is_object())
    throw FormatError("data file needs a \"tensors\" object");
  DataEnv out;
  for (auto& [name, entry] : doc["tensors"].items()) {
    TensorData td;
    if (!entry.contains("shape") || !entry.contains("data")) throw FormatError("tensor '" + name + "' needs shape and data");
    for (auto& d : entry["shape"]) td.shape.push_back(d.get<int>());
    size_t total = 1;
    for (int d : td.shape) total *= static_cast<size_t>(d);
    const Json& data = entry["data"];
    bool flat = data.is_array() && data.size() == total &&
                std::none_of(data.begin(), data.end(), [](const Json& x) { return x.is_array(); });
    if (flat) {
      for (auto& x : data) td.data.push_back(jsonRational(x));
    } else if (td.shape.empty() && !data.is_array()) {
      td.data.push_back(jsonRational(data));
    } else {
      flatten(data, td.shape, 0, td.data);
    }
    if (td.data.size() != total) throw FormatError("tensor '" + name + "' data size does not match shape");
    out[name] = std::move(td);
  }
  return out;
}

Json dataToDocument(const DataEnv& data) {
  Json t = Json::object();
  for (auto& [name, td] : data) {
    Json e;
    e["shape"] = td.shape;
    Json vals = Json::array();
    for (auto& q : td.data) vals.push_back(q.get_str());
    e["data"] = vals;
    t[name] = e;
  }
  Json doc;
  doc["tensors"] = t;
  return doc;
}

std::string readInput(const std::string& path) {
  std::ostringstream os;
  if (path == "-") {
    os << std::cin.rdbuf();
    return os.str();
  }
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  os << in.rdbuf();
  return os.str();
}

}  // namespace ein
