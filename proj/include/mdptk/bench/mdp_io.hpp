#pragma once

// Plain-text MDP files.
//
//   mdptk-mdp 1
//   n_states 2
//   n_actions 2
//   gamma 0.9
//   class discounted            (or: ssp)
//   terminals 0                 (count, then indices)
//   transitions 4               (count, then one "a s s' p r" line each)
//   0 0 0 1 0
//   ...
//
// '#' starts a comment. Omitted triples have probability and reward 0.
// Numbers are written with 17 significant digits, so save/load round-trips exactly.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdptk/errors.hpp"
#include "mdptk/mdp.hpp"

namespace mdptk::bench {

inline void save_mdp(const TabularMDP& mdp, std::ostream& os) {
  os << std::setprecision(17);
  os << "mdptk-mdp 1\n";
  os << "n_states " << mdp.n_states() << "\n";
  os << "n_actions " << mdp.n_actions() << "\n";
  os << "gamma " << mdp.discount() << "\n";
  os << "class " << to_string(mdp.problem_class()) << "\n";
  os << "terminals " << mdp.terminal_states().size();
  for (auto t : mdp.terminal_states()) os << ' ' << t;
  os << "\n";
  std::ostringstream body;
  body << std::setprecision(17);
  std::size_t count = 0;
  for (std::size_t a = 0; a < mdp.n_actions(); ++a)
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
      for (std::size_t j = 0; j < mdp.n_states(); ++j) {
        const double p = mdp.p(a, s, j), r = mdp.r(a, s, j);
        if (p == 0.0 && r == 0.0) continue;
        body << a << ' ' << s << ' ' << j << ' ' << p << ' ' << r << "\n";
        ++count;
      }
  os << "transitions " << count << "\n" << body.str();
}

inline void save_mdp(const TabularMDP& mdp, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_mdp(mdp, f);
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Next non-blank, comment-stripped line split into tokens; throws at end of input.
  std::vector<std::string> next(const char* expecting) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (!tokens.empty()) return tokens;
    }
    throw ParseError(std::string("unexpected end of file, expected ") + expecting, line_no_ + 1);
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& is_;
  std::size_t line_no_ = 0;
};

template <class T>
T parse_number(const std::string& tok, const char* field, std::size_t line) {
  T value{};
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError(std::string("field '") + field + "': cannot parse '" + tok + "'", line);
  return value;
}

inline std::string expect_key(LineReader& in, const char* key, std::vector<std::string>& tokens) {
  tokens = in.next(key);
  if (tokens[0] != key) throw ParseError(std::string("expected '") + key + "', found '" + tokens[0] + "'", in.line());
  if (tokens.size() < 2) throw ParseError(std::string("field '") + key + "' has no value", in.line());
  return tokens[1];
}

template <class T>
T expect_number(LineReader& in, const char* key, std::vector<std::string>& tokens) {
  const std::string tok = expect_key(in, key, tokens);
  return parse_number<T>(tok, key, in.line());
}

}  // namespace detail

/// Throws ParseError (with line number) on malformed input and ValidationError on invariant violations.
inline TabularMDP load_mdp(std::istream& is) {
  detail::LineReader in(is);
  std::vector<std::string> tok;
  auto header = in.next("header");
  if (header.size() != 2 || header[0] != "mdptk-mdp" || header[1] != "1")
    throw ParseError("missing 'mdptk-mdp 1' header", in.line());
  const auto n = detail::expect_number<std::size_t>(in, "n_states", tok);
  const auto na = detail::expect_number<std::size_t>(in, "n_actions", tok);
  if (n == 0 || na == 0) throw ParseError("n_states and n_actions must be positive", in.line());
  const auto gamma = detail::expect_number<double>(in, "gamma", tok);
  const auto cls_tok = detail::expect_key(in, "class", tok);
  ProblemClass cls;
  if (cls_tok == "discounted")
    cls = ProblemClass::Discounted;
  else if (cls_tok == "ssp")
    cls = ProblemClass::StochasticShortestPath;
  else
    throw ParseError("field 'class': expected 'discounted' or 'ssp', found '" + cls_tok + "'", in.line());

  const auto n_term = detail::expect_number<std::size_t>(in, "terminals", tok);
  if (tok.size() != 2 + n_term) throw ParseError("field 'terminals': expected " + std::to_string(n_term) + " indices", in.line());
  std::vector<std::size_t> terminals;
  for (std::size_t i = 0; i < n_term; ++i) {
    const auto t = detail::parse_number<std::size_t>(tok[2 + i], "terminals", in.line());
    if (t >= n) throw ParseError("terminal index " + std::to_string(t) + " out of range", in.line());
    terminals.push_back(t);
  }

  const auto count = detail::expect_number<std::size_t>(in, "transitions", tok);
  const auto ni = static_cast<Eigen::Index>(n);
  std::vector<Matrix> p(na, Matrix::Zero(ni, ni)), r(na, Matrix::Zero(ni, ni));
  for (std::size_t k = 0; k < count; ++k) {
    auto t = in.next("transition triple");
    if (t.size() != 5) throw ParseError("transition line needs 5 fields 'a s s' p r'", in.line());
    const auto a = detail::parse_number<std::size_t>(t[0], "a", in.line());
    const auto s = detail::parse_number<std::size_t>(t[1], "s", in.line());
    const auto s2 = detail::parse_number<std::size_t>(t[2], "s'", in.line());
    if (a >= na || s >= n || s2 >= n) throw ParseError("transition index out of range", in.line());
    p[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) = detail::parse_number<double>(t[3], "p", in.line());
    r[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) = detail::parse_number<double>(t[4], "r", in.line());
  }
  return TabularMDP(std::move(p), std::move(r), gamma, cls, std::move(terminals));
}

inline TabularMDP load_mdp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return load_mdp(f);
}

}  // namespace mdptk::bench
