#include "svscl/cli.hpp"

#include "svscl/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

namespace svscl {

namespace {

std::string join_diagnostics(const std::vector<ConfigDiagnostic>& ds) {
  std::string s;
  for (const auto& d : ds) {
    if (!s.empty()) s += "; ";
    s += "line " + std::to_string(d.line);
    if (d.column > 0) s += ", column " + std::to_string(d.column);
    s += ": " + d.message;
  }
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigDiagnostic> diagnostics)
    : Error(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

// ---------------------------------------------------------------------------
// Exact expressions

namespace {

using Poly = std::vector<ExactScalar>;

struct ExprError {
  int column;  // 1-based within the expression text
  std::string message;
};

void trim_poly(Poly& p) {
  while (!p.empty() && p.back().is_zero()) p.pop_back();
}

Poly poly_add(Poly a, const Poly& b, bool subtract) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += subtract ? -b[i] : b[i];
  trim_poly(a);
  return a;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  trim_poly(out);
  return out;
}

class ExprParser {
 public:
  ExprParser(std::string_view text, const std::map<std::string, ExactScalar>& constants, bool allow_u)
      : s_(text), constants_(constants), allow_u_(allow_u) {}

  Poly parse() {
    Poly p = expr();
    skip_space();
    if (pos_ < s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ExprError{static_cast<int>(pos_) + 1, msg}; }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  bool starts_factor() {
    const char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
           c == '(' || c == '.';
  }

  Poly expr() {
    bool negate_first = false;
    if (peek() == '+' || peek() == '-') {
      negate_first = s_[pos_] == '-';
      ++pos_;
    }
    Poly p = term();
    if (negate_first) p = poly_add({}, p, true);
    while (peek() == '+' || peek() == '-') {
      const bool sub = s_[pos_] == '-';
      ++pos_;
      p = poly_add(p, term(), sub);
    }
    return p;
  }

  Poly term() {
    Poly p = factor();
    for (;;) {
      const char c = peek();
      if (c == '*') {
        ++pos_;
        p = poly_mul(p, factor());
      } else if (c == '/') {
        ++pos_;
        const std::size_t at = pos_;
        const Poly d = factor();
        if (d.size() != 1 || !d[0].is_rational() || d[0].is_zero()) {
          pos_ = at;
          fail("division only by a nonzero rational");
        }
        p = poly_mul(p, Poly{ExactScalar(Rational(1) / d[0].rational_part())});
      } else if (starts_factor()) {
        p = poly_mul(p, factor());  // implicit product, e.g. "1/2 u^2"
      } else {
        return p;
      }
    }
  }

  Poly factor() {
    if (peek() == '-') {
      ++pos_;
      return poly_add({}, factor(), true);
    }
    Poly base = atom();
    if (peek() == '^') {
      ++pos_;
      skip_space();
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("expected an integer exponent");
      int e = 0;
      std::from_chars(s_.data() + start, s_.data() + pos_, e);
      if (e > 64) fail("exponent too large");
      Poly r{ExactScalar(1)};
      for (int i = 0; i < e; ++i) r = poly_mul(r, base);
      return r;
    }
    return base;
  }

  Poly atom() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Poly p = expr();
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return {number()};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id(s_.substr(start, pos_ - start));
      if (id == "u") {
        if (!allow_u_) {
          pos_ = start;
          fail("the variable u is not allowed here");
        }
        return {ExactScalar(0), ExactScalar(1)};
      }
      if (id == "sqrt") {
        if (peek() != '(') fail("expected '(' after sqrt");
        ++pos_;
        skip_space();
        const std::size_t ns = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (ns == pos_) fail("sqrt takes a non-negative integer");
        std::uint64_t n = 0;
        const auto [p, ec] = std::from_chars(s_.data() + ns, s_.data() + pos_, n);
        if (ec != std::errc()) fail("sqrt argument out of range");
        if (peek() != ')') fail("sqrt takes a non-negative integer");
        ++pos_;
        Poly r{ExactScalar::sqrt_of(n)};
        trim_poly(r);
        return r;
      }
      const auto it = constants_.find(id);
      if (it == constants_.end()) {
        pos_ = start;
        fail("unknown constant '" + id + "' (coefficients must be rationals or square roots)");
      }
      Poly r{it->second};
      trim_poly(r);
      return r;
    }
    if (c == '\0') fail("unexpected end of expression");
    fail("unexpected '" + std::string(1, c) + "'");
  }

  ExactScalar number() {
    const std::size_t start = pos_;
    std::string digits;
    int frac = 0;
    bool dot = false;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
      if (s_[pos_] == '.') {
        if (dot) fail("malformed number");
        dot = true;
      } else {
        digits += s_[pos_];
        if (dot) ++frac;
      }
      ++pos_;
    }
    if (digits.empty()) {
      pos_ = start;
      fail("malformed number");
    }
    int exp10 = 0;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      const std::size_t es = q;
      while (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) ++q;
      if (q > es) {
        std::from_chars(s_.data() + (s_[pos_ + 1] == '+' ? pos_ + 2 : pos_ + 1), s_.data() + q, exp10);
        pos_ = q;
      }
    }
    // a leading zero would make the BigInt constructor read octal
    const std::size_t nz = std::min(digits.find_first_not_of('0'), digits.size() - 1);
    Rational r{BigInt(digits.substr(nz))};
    const int shift = exp10 - frac;
    if (shift > 400 || shift < -400) fail("exponent out of range");
    const BigInt ten = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::abs(shift)));
    if (shift >= 0) {
      r *= ten;
    } else {
      r /= ten;
    }
    return ExactScalar(r);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  const std::map<std::string, ExactScalar>& constants_;
  bool allow_u_;
};

}  // namespace

std::vector<ExactScalar> parse_polynomial(std::string_view text, const std::map<std::string, ExactScalar>& constants) {
  try {
    return ExprParser(text, constants, true).parse();
  } catch (const ExprError& e) {
    throw ParseError({{0, e.column, e.message}});
  }
}

ExactScalar parse_exact_scalar(std::string_view text, const std::map<std::string, ExactScalar>& constants) {
  try {
    const Poly p = ExprParser(text, constants, false).parse();
    return p.empty() ? ExactScalar(0) : p[0];
  } catch (const ExprError& e) {
    throw ParseError({{0, e.column, e.message}});
  }
}

std::string format_polynomial(const std::vector<ExactScalar>& coeffs) {
  std::string s;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (coeffs[j].is_zero()) continue;
    if (!s.empty()) s += " + ";
    s += "(" + coeffs[j].to_string() + ")";
    if (j == 1) s += "*u";
    if (j > 1) s += "*u^" + std::to_string(j);
  }
  return s.empty() ? "0" : s;
}

// ---------------------------------------------------------------------------
// Line grammar

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_k(const Wavevector& k) {
  std::string s = "(";
  for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
  return s + ")";
}

struct Located {
  int line;
  int column;
  std::string value;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  RunConfig run() {
    split_lines();
    build();
    if (!syntax_.empty()) throw ParseError(syntax_);
    if (!semantic_.empty()) throw ValidationError(semantic_);
    return cfg_;
  }

 private:
  void syntax(int line, int col, std::string msg) { syntax_.push_back({line, col, std::move(msg)}); }
  void semantic(int line, std::string msg) { semantic_.push_back({line, 0, std::move(msg)}); }

  void split_lines() {
    static const std::set<std::string> sections = {"flux",   "noise",      "sim",     "initial", "initial_b",
                                                   "lattice", "experiment", "output", "malliavin", "tangent"};
    std::string section;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text_.size()) {
      std::size_t end = text_.find('\n', start);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view raw = text_.substr(start, end - start);
      ++line_no;
      start = end + 1;
      // strip a comment outside quotes
      bool quoted = false;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '"') quoted = !quoted;
        if (raw[i] == '#' && !quoted) {
          raw = raw.substr(0, i);
          break;
        }
      }
      const std::string_view line = trim(raw);
      if (line.empty()) {
        if (end == text_.size()) break;
        continue;
      }
      const int indent = static_cast<int>(raw.find_first_not_of(" \t")) + 1;
      if (line.front() == '[') {
        if (line.back() != ']') {
          syntax(line_no, indent + static_cast<int>(line.size()), "expected ']'");
        } else {
          section = std::string(trim(line.substr(1, line.size() - 2)));
          if (!sections.contains(section)) {
            semantic(line_no, "unknown section [" + section + "]");
            section = "?";
          } else {
            seen_sections_.insert(section);
          }
        }
      } else {
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
          syntax(line_no, indent, "expected 'key = value'");
        } else {
          const std::string key(trim(line.substr(0, eq)));
          std::string_view value = trim(line.substr(eq + 1));
          const std::string_view after = line.substr(eq + 1);
          const std::size_t ws = std::min(after.find_first_not_of(" \t"), after.size());
          const int vcol = indent + static_cast<int>(eq + 1 + ws);
          if (key.empty()) {
            syntax(line_no, indent, "missing key");
          } else if (section.empty()) {
            semantic(line_no, "key '" + key + "' outside a section");
          } else if (section != "?") {
            std::string v(value);
            int col = vcol;
            if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
              v = v.substr(1, v.size() - 2);
              ++col;
            } else if (!v.empty() && (v.front() == '"' || v.back() == '"')) {
              syntax(line_no, vcol, "unterminated string");
              if (end == text_.size()) break;
              continue;
            }
            auto& entries = entries_[section];
            if (entries.contains(key)) {
              semantic(line_no, "duplicate key '" + key + "'");
            } else {
              entries[key] = {line_no, col, v};
              order_[section].push_back(key);
            }
          }
        }
      }
      if (end == text_.size()) break;
    }
  }

  // typed accessors; each consumes the key
  std::optional<Located> take(const std::string& section, const std::string& key) {
    auto& e = entries_[section];
    const auto it = e.find(key);
    if (it == e.end()) return std::nullopt;
    Located l = it->second;
    e.erase(it);
    return l;
  }

  std::optional<double> get_double(const std::string& section, const std::string& key) {
    auto l = take(section, key);
    if (!l) return std::nullopt;
    double v = 0.0;
    const auto& s = l->value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      syntax(l->line, l->column, "expected a number for '" + key + "'");
      return std::nullopt;
    }
    return v;
  }

  template <class Int>
  std::optional<Int> get_int(const std::string& section, const std::string& key) {
    auto l = take(section, key);
    if (!l) return std::nullopt;
    Int v{};
    const auto& s = l->value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      syntax(l->line, l->column, "expected an integer for '" + key + "'");
      return std::nullopt;
    }
    return v;
  }

  static std::vector<std::string> split_top(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || (s[i] == ',' && depth == 0)) {
        const auto part = trim(s.substr(start, i - start));
        if (!part.empty() || i < s.size()) out.emplace_back(part);
        start = i + 1;
      } else if (s[i] == '(') {
        ++depth;
      } else if (s[i] == ')') {
        --depth;
      }
    }
    return out;
  }

  std::optional<Wavevector> wavevector(std::string_view s, int line, int col) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
    Wavevector k;
    for (const auto& part : split_top(s)) {
      int v = 0;
      const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (part.empty() || ec != std::errc() || p != part.data() + part.size()) {
        syntax(line, col, "malformed wavevector '" + std::string(s) + "'");
        return std::nullopt;
      }
      k.push_back(v);
    }
    if (k.empty()) {
      syntax(line, col, "empty wavevector");
      return std::nullopt;
    }
    return k;
  }

  std::optional<std::vector<double>> double_list(const Located& l) {
    std::vector<double> out;
    for (const auto& part : split_top(l.value)) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (ec != std::errc() || p != part.data() + part.size()) {
        syntax(l.line, l.column, "expected a list of numbers");
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  void reject_rest() {
    for (const auto& [section, keys] : order_) {
      for (const auto& key : keys) {
        const auto it = entries_[section].find(key);
        if (it != entries_[section].end()) semantic(it->second.line, "unknown key '" + key + "' in [" + section + "]");
      }
    }
  }

  void build() {
    SimConfig& sim = cfg_.sim;
    // [flux]
    int dim = 1;
    if (auto d = get_int<int>("flux", "d")) dim = *d;
    if (dim < 1 || dim > 3) {
      semantic(0, "flux dimension must be 1, 2 or 3");
      dim = 1;
    }
    std::vector<std::vector<ExactScalar>> coeffs(dim, std::vector<ExactScalar>{ExactScalar(0)});
    for (const auto& key : order_["flux"]) {
      auto& e = entries_["flux"];
      const auto it = e.find(key);
      if (it == e.end()) continue;
      const Located l = it->second;
      const bool is_component = key.size() >= 2 && key[0] == 'A' &&
                                std::all_of(key.begin() + 1, key.end(), [](char c) { return std::isdigit(c); });
      if (is_component) continue;
      const bool ident = (std::isalpha(static_cast<unsigned char>(key[0])) || key[0] == '_') &&
                         std::all_of(key.begin(), key.end(), [](char c) { return std::isalnum(c) || c == '_'; });
      if (!ident || key == "u" || key == "sqrt") {
        semantic(l.line, "invalid constant name '" + key + "'");
        e.erase(it);
        continue;
      }
      try {
        cfg_.constants[key] = parse_exact_scalar(l.value, cfg_.constants);
      } catch (const ParseError& pe) {
        syntax(l.line, l.column + pe.diagnostics()[0].column - 1, pe.diagnostics()[0].message);
      }
      e.erase(it);
    }
    for (const auto& key : order_["flux"]) {
      auto l = take("flux", key);
      if (!l) continue;
      const int i = std::stoi(key.substr(1));
      if (i < 1 || i > dim) {
        semantic(l->line, "flux component " + key + " exceeds the dimension");
        continue;
      }
      try {
        coeffs[i - 1] = parse_polynomial(l->value, cfg_.constants);
        if (coeffs[i - 1].empty()) coeffs[i - 1] = {ExactScalar(0)};
      } catch (const ParseError& pe) {
        syntax(l->line, l->column + pe.diagnostics()[0].column - 1, pe.diagnostics()[0].message);
      }
    }
    try {
      sim.flux = FluxPoly(dim, coeffs);
    } catch (const Error& e) {
      semantic(0, e.what());
    }

    // [noise]
    {
      std::vector<Wavevector> modes;
      std::vector<double> amps;
      const auto pattern = take("noise", "pattern");
      const auto amplitude = get_double("noise", "amplitude");
      const auto modes_l = take("noise", "modes");
      const auto amps_l = take("noise", "amplitudes");
      int line = pattern ? pattern->line : (modes_l ? modes_l->line : 0);
      if (pattern) {
        if (pattern->value != "axis") semantic(pattern->line, "unknown noise pattern '" + pattern->value + "'");
        if (!amplitude) semantic(pattern->line, "pattern noise needs an amplitude");
        if (modes_l) semantic(modes_l->line, "give either pattern or modes");
        if (pattern->value == "axis" && amplitude) {
          const NoiseSet n = axis_pattern_noise(dim, *amplitude);
          modes = n.wavevectors;
          amps = n.amplitudes;
        }
      } else if (modes_l) {
        for (const auto& part : split_top(modes_l->value)) {
          if (auto k = wavevector(part, modes_l->line, modes_l->column)) modes.push_back(*k);
        }
        if (amps_l) {
          if (auto a = double_list(*amps_l)) amps = *a;
          if (amplitude) semantic(amps_l->line, "give either amplitude or amplitudes");
        } else if (amplitude) {
          amps.assign(modes.size(), *amplitude);
        } else {
          semantic(modes_l->line, "noise modes need an amplitude");
        }
        if (amps.size() != modes.size()) {
          semantic(modes_l->line, "one amplitude per noise mode");
          amps.resize(modes.size(), 1.0);
        }
        // symmetric closure
        const std::size_t n = modes.size();
        for (std::size_t i = 0; i < n; ++i) {
          const Wavevector m = negate(modes[i]);
          if (std::find(modes.begin(), modes.end(), m) == modes.end()) {
            modes.push_back(m);
            amps.push_back(amps[i]);
          }
        }
      } else if (amplitude || amps_l) {
        semantic(amplitude ? 0 : amps_l->line, "noise amplitudes without modes");
      }
      if (!modes.empty()) {
        try {
          sim.noise = NoiseSet(dim, modes, amps);
          for (std::size_t i = 0; i < sim.noise.size(); ++i) {
            if (sim.noise.amplitude(negate(sim.noise.wavevectors[i])) != sim.noise.amplitudes[i]) {
              semantic(line, "amplitudes of k and -k must agree");
              break;
            }
          }
        } catch (const Error& e) {
          semantic(line, e.what());
        }
      } else {
        sim.noise = NoiseSet{};
        sim.noise.dim = dim;
      }
    }

    // [sim]
    if (auto v = get_double("sim", "nu")) sim.nu = *v;
    if (auto v = get_int<int>("sim", "cutoff")) sim.cutoff = *v;
    if (auto v = get_int<int>("sim", "grid")) sim.grid_size = *v;
    if (auto v = get_double("sim", "dt")) sim.dt = *v;
    if (auto v = get_double("sim", "t_end")) sim.t_end = *v;
    if (auto l = take("sim", "scheme")) {
      if (l->value == "EXP_EULER") {
        sim.scheme = Scheme::ExpEuler;
      } else if (l->value == "SEMI_IMPLICIT_EULER") {
        sim.scheme = Scheme::SemiImplicitEuler;
      } else {
        semantic(l->line, "unknown scheme '" + l->value + "'");
      }
    }
    if (auto v = get_int<std::uint64_t>("sim", "seed")) sim.seed = *v;
    if (auto v = get_int<std::uint64_t>("sim", "stream")) sim.stream_id = *v;
    if (auto v = get_double("sim", "blowup")) sim.blowup_threshold = *v;
    if (sim.cutoff < 1) semantic(0, "cutoff must be >= 1");

    // [initial], [initial_b]
    auto field_section = [&](const std::string& name, SpectralField& out) {
      if (!seen_sections_.contains(name) || sim.cutoff < 1) return;
      out = SpectralField(dim, sim.cutoff);
      for (const auto& key : order_[name]) {
        auto l = take(name, key);
        if (!l) continue;
        const auto k = wavevector(key, l->line, 1);
        if (!k) continue;
        if (static_cast<int>(k->size()) != dim || !out.layout().find(*k)) {
          semantic(l->line, "initial mode " + fmt_k(*k) + " is outside the cutoff");
          continue;
        }
        double v = 0.0;
        const auto [p, ec] = std::from_chars(l->value.data(), l->value.data() + l->value.size(), v);
        if (ec != std::errc() || p != l->value.data() + l->value.size()) {
          syntax(l->line, l->column, "expected a number");
          continue;
        }
        out.set(*k, v);
      }
    };
    field_section("initial", sim.initial);
    field_section("initial_b", cfg_.initial_b);

    // [lattice]
    if (auto v = get_int<int>("lattice", "radius")) cfg_.radius = *v;
    if (auto v = get_int<int>("lattice", "margin")) cfg_.margin = *v;
    if (cfg_.radius < 1) semantic(0, "lattice radius must be >= 1");
    if (cfg_.margin && *cfg_.margin < 0) semantic(0, "lattice margin must be >= 0");

    // [experiment]
    if (auto l = take("experiment", "name")) {
      cfg_.experiment = l->value;
      if (!is_experiment(l->value)) semantic(l->line, "unknown experiment '" + l->value + "'");
    }
    if (auto v = get_int<std::size_t>("experiment", "ensemble")) {
      cfg_.ensemble_size = *v;
      if (*v == 0) semantic(0, "ensemble must be >= 1");
    }
    if (auto v = get_double("experiment", "burn_in")) {
      cfg_.burn_in = *v;
      if (*v < 0.0) semantic(0, "burn_in must be >= 0");
    }
    if (auto l = take("experiment", "observables")) {
      for (const auto& part : split_top(l->value)) {
        if (part == "l2") {
          cfg_.observables.push_back(Observable::l2());
        } else if (part.starts_with("sobolev(") && part.back() == ')') {
          double v = 0.0;
          const auto inner = part.substr(8, part.size() - 9);
          const auto [p, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), v);
          if (ec != std::errc() || p != inner.data() + inner.size()) {
            syntax(l->line, l->column, "malformed observable '" + part + "'");
          } else {
            cfg_.observables.push_back(Observable::sobolev(v));
          }
        } else if (part.starts_with("mode(") && part.back() == ')') {
          if (auto k = wavevector(part.substr(4), l->line, l->column)) cfg_.observables.push_back(Observable::mode(*k));
        } else {
          syntax(l->line, l->column, "malformed observable '" + part + "'");
        }
      }
    }
    for (const auto& key : order_["experiment"]) {
      if (auto l = take("experiment", key)) cfg_.params[key] = l->value;
    }

    // [output]
    if (auto l = take("output", "path")) cfg_.output_path = l->value;
    if (auto l = take("output", "series_dir")) cfg_.series_dir = l->value;
    if (auto v = get_int<std::size_t>("output", "snapshot_every")) cfg_.snapshot_every = *v;

    // [malliavin]
    if (auto v = get_double("malliavin", "basis_radius")) cfg_.gram_basis_radius = *v;
    if (auto v = get_int<int>("malliavin", "windows")) cfg_.gram_windows = *v;
    if (!(cfg_.gram_basis_radius >= 1.0)) semantic(0, "basis_radius must be >= 1");
    if (cfg_.gram_windows < 1) semantic(0, "windows must be >= 1");

    // [tangent]
    if (auto l = take("tangent", "xi")) {
      if (auto k = wavevector(l->value, l->line, l->column)) cfg_.tangent_xi = *k;
    }
    if (auto l = take("tangent", "epsilons")) {
      if (auto v = double_list(*l)) cfg_.tangent_epsilons = *v;
      if (cfg_.tangent_epsilons.empty() ||
          std::any_of(cfg_.tangent_epsilons.begin(), cfg_.tangent_epsilons.end(), [](double e) { return !(e > 0.0); })) {
        semantic(l->line, "epsilons must be positive");
      }
    }

    reject_rest();
    if (syntax_.empty() && semantic_.empty()) {
      if (sim.noise.size() && sim.noise.dim != dim) semantic(0, "noise dimension differs from the flux dimension");
      if (!cfg_.tangent_xi.empty() && static_cast<int>(cfg_.tangent_xi.size()) != dim) {
        semantic(0, "tangent xi has the wrong dimension");
      }
      try {
        sim.validate();
      } catch (const Error& e) {
        semantic(0, e.what());
      }
    }
  }

  std::string_view text_;
  RunConfig cfg_;
  std::vector<ConfigDiagnostic> syntax_, semantic_;
  std::set<std::string> seen_sections_;
  std::map<std::string, std::map<std::string, Located>> entries_;
  std::map<std::string, std::vector<std::string>> order_;
};

bool same_field(const SpectralField& a, const SpectralField& b) {
  if (a.size() == 0 || b.size() == 0) return a.size() == b.size();
  return a == b;
}

}  // namespace

RunConfig parse_config(std::string_view text) { return Parser(text).run(); }

bool operator==(const RunConfig& a, const RunConfig& b) {
  const SimConfig &x = a.sim, &y = b.sim;
  return x.nu == y.nu && x.flux == y.flux && x.noise.wavevectors == y.noise.wavevectors &&
         x.noise.amplitudes == y.noise.amplitudes && x.cutoff == y.cutoff && x.grid_size == y.grid_size &&
         x.dt == y.dt && x.t_end == y.t_end && x.scheme == y.scheme && x.seed == y.seed &&
         x.stream_id == y.stream_id && x.blowup_threshold == y.blowup_threshold && same_field(x.initial, y.initial) &&
         a.constants == b.constants && a.radius == b.radius && a.margin == b.margin && a.experiment == b.experiment &&
         a.ensemble_size == b.ensemble_size && a.burn_in == b.burn_in && a.params == b.params &&
         a.observables == b.observables && same_field(a.initial_b, b.initial_b) && a.output_path == b.output_path &&
         a.series_dir == b.series_dir && a.snapshot_every == b.snapshot_every &&
         a.gram_basis_radius == b.gram_basis_radius && a.gram_windows == b.gram_windows &&
         a.tangent_xi == b.tangent_xi && a.tangent_epsilons == b.tangent_epsilons;
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream o;
  const SimConfig& s = c.sim;
  const int dim = s.flux.dim();
  o << "[flux]\n" << "d = " << dim << "\n";
  for (const auto& [name, value] : c.constants) o << name << " = " << value.to_string() << "\n";
  for (int i = 0; i < dim; ++i) {
    std::vector<ExactScalar> p;
    for (int j = 0; j <= s.flux.max_power(); ++j) p.push_back(s.flux.coeff(i, j));
    o << "A" << i + 1 << " = \"" << format_polynomial(p) << "\"\n";
  }
  if (!s.noise.empty()) {
    o << "\n[noise]\nmodes = [";
    for (std::size_t i = 0; i < s.noise.size(); ++i) o << (i ? ", " : "") << fmt_k(s.noise.wavevectors[i]);
    o << "]\namplitudes = [";
    for (std::size_t i = 0; i < s.noise.size(); ++i) o << (i ? ", " : "") << fmt(s.noise.amplitudes[i]);
    o << "]\n";
  }
  o << "\n[sim]\n"
    << "nu = " << fmt(s.nu) << "\ncutoff = " << s.cutoff << "\ngrid = " << s.grid_size << "\ndt = " << fmt(s.dt)
    << "\nt_end = " << fmt(s.t_end) << "\nscheme = " << to_string(s.scheme) << "\nseed = " << s.seed
    << "\nstream = " << s.stream_id << "\nblowup = " << fmt(s.blowup_threshold) << "\n";
  auto field = [&](const char* name, const SpectralField& f) {
    if (f.size() == 0) return;
    o << "\n[" << name << "]\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] != 0.0) o << fmt_k(f.layout().wavevector(i)) << " = " << fmt(f[i]) << "\n";
    }
  };
  field("initial", s.initial);
  field("initial_b", c.initial_b);
  o << "\n[lattice]\nradius = " << c.radius << "\n";
  if (c.margin) o << "margin = " << *c.margin << "\n";
  if (!c.experiment.empty() || c.ensemble_size || c.burn_in || !c.params.empty() || !c.observables.empty()) {
    o << "\n[experiment]\n";
    if (!c.experiment.empty()) o << "name = " << c.experiment << "\n";
    if (c.ensemble_size) o << "ensemble = " << *c.ensemble_size << "\n";
    if (c.burn_in) o << "burn_in = " << fmt(*c.burn_in) << "\n";
    if (!c.observables.empty()) {
      o << "observables = [";
      for (std::size_t i = 0; i < c.observables.size(); ++i) {
        const auto& ob = c.observables[i];
        o << (i ? ", " : "");
        if (ob.kind == Observable::Kind::Mode) {
          o << "mode" << fmt_k(ob.k);
        } else if (ob.kind == Observable::Kind::Sobolev) {
          o << "sobolev(" << fmt(ob.order) << ")";
        } else {
          o << "l2";
        }
      }
      o << "]\n";
    }
    for (const auto& [k, v] : c.params) o << k << " = \"" << v << "\"\n";
  }
  if (!c.output_path.empty() || !c.series_dir.empty() || c.snapshot_every) {
    o << "\n[output]\n";
    if (!c.output_path.empty()) o << "path = \"" << c.output_path << "\"\n";
    if (!c.series_dir.empty()) o << "series_dir = \"" << c.series_dir << "\"\n";
    if (c.snapshot_every) o << "snapshot_every = " << c.snapshot_every << "\n";
  }
  o << "\n[malliavin]\nbasis_radius = " << fmt(c.gram_basis_radius) << "\nwindows = " << c.gram_windows << "\n";
  o << "\n[tangent]\n";
  if (!c.tangent_xi.empty()) o << "xi = " << fmt_k(c.tangent_xi) << "\n";
  o << "epsilons = [";
  for (std::size_t i = 0; i < c.tangent_epsilons.size(); ++i) o << (i ? ", " : "") << fmt(c.tangent_epsilons[i]);
  o << "]\n";
  return o.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : emit_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

int RunConfig::lattice_margin() const { return margin.value_or(2 * std::max(1, flux_degree(sim.flux))); }

ExperimentSpec experiment_spec(const RunConfig& config, const std::string& name, bool use_config_sim) {
  ExperimentSpec s = default_spec(name);
  if (use_config_sim) {
    s.config = config.sim;
    if (config.initial_b.size()) s.initial_b = config.initial_b;
  }
  for (const auto& [k, v] : config.params) s.params[k] = v;
  if (config.ensemble_size) s.ensemble_size = *config.ensemble_size;
  if (config.burn_in) s.burn_in = *config.burn_in;
  if (!config.observables.empty()) s.observables = config.observables;
  return s;
}

}  // namespace svscl
