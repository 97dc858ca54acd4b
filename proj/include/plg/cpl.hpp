#pragma once

// A small CP-rule language: parse, ground, and answer queries by exact
// possible-world enumeration.  Heads are annotated disjunctions whose
// probabilities sum to at most one; bodies allow stratified negation;
// integrity constraints and evidence condition the world distribution.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "plg/geometry.hpp"  // InputError / InferenceError

namespace plg::cpl {

// ---------------------------------------------------------------------------
// AST

struct Rational {
  long long num = 0;
  long long den = 1;

  void reduce() {
    if (den < 0) { num = -num; den = -den; }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }
  double value() const { return double(num) / double(den); }
};

// Exact sum used for the head-probability invariant; falls back to a parse
// error if the denominators grow past 64 bits (never the case for sane KBs).
inline Rational add(const Rational& a, const Rational& b) {
  __int128 num = __int128(a.num) * b.den + __int128(b.num) * a.den;
  __int128 den = __int128(a.den) * b.den;
  __int128 x = num < 0 ? -num : num, y = den;
  while (y != 0) { __int128 t = x % y; x = y; y = t; }
  if (x > 1) { num /= x; den /= x; }
  if (num > std::numeric_limits<long long>::max() ||
      den > std::numeric_limits<long long>::max())
    throw InputError("probability arithmetic overflow");
  Rational r;
  r.num = (long long)(num);
  r.den = (long long)(den);
  return r;
}

struct Atom {
  std::string pred;
  std::vector<std::string> args;

  std::string str() const {
    if (args.empty()) return pred;
    std::string s = pred + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) s += ',';
      s += args[i];
    }
    return s + ")";
  }
  bool operator==(const Atom& o) const {
    return pred == o.pred && args == o.args;
  }
};

inline bool is_variable(const std::string& term) {
  return !term.empty() && (std::isupper((unsigned char)term[0]) || term[0] == '_');
}

inline bool atom_is_ground(const Atom& a) {
  for (const auto& t : a.args)
    if (is_variable(t)) return false;
  return true;
}

struct Literal {
  Atom atom;
  bool negated = false;
};

enum class RuleKind { annotated_disjunction, deterministic, constraint };

struct HeadChoice {
  Rational prob{1, 1};
  Atom atom;
};

struct CpRule {
  RuleKind kind = RuleKind::deterministic;
  std::vector<HeadChoice> head;  // empty for constraints
  std::vector<Literal> body;
  int line = 1, col = 1;
  // True when the head probabilities sum to exactly 1: no silent "none of
  // the heads" outcome exists for this rule.
  bool closed = true;
};

struct CpProgram {
  std::vector<CpRule> rules;
  std::vector<std::string> constants;  // sorted, unique

  void note_constant(const std::string& c) {
    auto it = std::lower_bound(constants.begin(), constants.end(), c);
    if (it == constants.end() || *it != c) constants.insert(it, c);
  }
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

struct Token {
  enum Kind { Ident, Number, Prob, Semi, Comma, LPar, RPar, Arrow, Dot,
              Slash, End } kind = End;
  std::string text;
  Rational value{0, 1};
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : s_(text) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= s_.size()) { t.kind = Token::End; return t; }
    char c = s_[pos_];
    if (std::isalpha((unsigned char)c) || c == '_') {
      t.kind = Token::Ident;
      while (pos_ < s_.size() &&
             (std::isalnum((unsigned char)s_[pos_]) || s_[pos_] == '_' ||
              s_[pos_] == '&'))
        t.text += take();
      return t;
    }
    if (std::isdigit((unsigned char)c)) {
      t.kind = Token::Number;
      std::string digits;
      while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_]))
        digits += take();
      std::string frac;
      if (pos_ + 1 < s_.size() && s_[pos_] == '.' &&
          std::isdigit((unsigned char)s_[pos_ + 1])) {
        take();
        while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_]))
          frac += take();
      }
      if (digits.size() + frac.size() > 18)
        fail(t, "numeric literal too long");
      t.value.num = std::stoll(digits + frac);
      t.value.den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) t.value.den *= 10;
      t.value.reduce();
      t.text = digits + (frac.empty() ? "" : "." + frac);
      return t;
    }
    switch (c) {
      case ';': take(); t.kind = Token::Semi; return t;
      case ',': take(); t.kind = Token::Comma; return t;
      case '(': take(); t.kind = Token::LPar; return t;
      case ')': take(); t.kind = Token::RPar; return t;
      case '.': take(); t.kind = Token::Dot; return t;
      case '/': take(); t.kind = Token::Slash; return t;
      case ':':
        take();
        if (pos_ < s_.size() && s_[pos_] == ':') { take(); t.kind = Token::Prob; return t; }
        if (pos_ < s_.size() && s_[pos_] == '-') { take(); t.kind = Token::Arrow; return t; }
        fail(t, "expected ':-' or '::'");
      case '<':
        take();
        if (pos_ < s_.size() && s_[pos_] == '-') { take(); t.kind = Token::Arrow; return t; }
        fail(t, "expected '<-'");
      default:
        fail(t, std::string("unexpected character '") + c + "'");
    }
    return t;  // unreachable
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw InputError("line " + std::to_string(t.line) + ", col " +
                     std::to_string(t.col) + ": " + msg);
  }
  char take() {
    char c = s_[pos_++];
    if (c == '\n') { ++line_; col_ = 1; } else { ++col_; }
    return c;
  }
  void skip_space() {
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (c == '%') {
        while (pos_ < s_.size() && s_[pos_] != '\n') take();
      } else if (std::isspace((unsigned char)c)) {
        take();
      } else {
        break;
      }
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) { advance(); }

  CpProgram parse() {
    CpProgram prog;
    while (cur_.kind != Token::End) prog.rules.push_back(clause());
    for (const auto& r : prog.rules) {
      for (const auto& h : r.head) note_ground_args(prog, h.atom);
      for (const auto& l : r.body) note_ground_args(prog, l.atom);
    }
    return prog;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("line " + std::to_string(cur_.line) + ", col " +
                     std::to_string(cur_.col) + ": " + msg);
  }
  void advance() { cur_ = lex_.next(); }
  void expect(Token::Kind k, const char* what) {
    if (cur_.kind != k) fail(std::string("expected ") + what);
    advance();
  }

  static void note_ground_args(CpProgram& prog, const Atom& a) {
    for (const auto& t : a.args)
      if (!is_variable(t)) prog.note_constant(t);
  }

  void check_arity(const Atom& a, int line, int col) {
    auto [it, fresh] = arity_.try_emplace(a.pred, a.args.size());
    if (!fresh && it->second != a.args.size())
      throw InputError("line " + std::to_string(line) + ", col " +
                       std::to_string(col) + ": predicate '" + a.pred +
                       "' used with arity " + std::to_string(a.args.size()) +
                       " and " + std::to_string(it->second));
  }

  Atom atom() {
    if (cur_.kind != Token::Ident) fail("expected an atom");
    int line = cur_.line, col = cur_.col;
    Atom a;
    a.pred = cur_.text;
    advance();
    if (cur_.kind == Token::LPar) {
      advance();
      while (true) {
        if (cur_.kind == Token::Ident) {
          a.args.push_back(cur_.text);
          advance();
        } else if (cur_.kind == Token::Number) {
          a.args.push_back(cur_.text);
          advance();
        } else {
          fail("expected a term");
        }
        if (cur_.kind == Token::Comma) { advance(); continue; }
        break;
      }
      expect(Token::RPar, "')'");
    }
    if (a.pred == "false" && !a.args.empty()) fail("'false' takes no arguments");
    if (a.pred != "false") check_arity(a, line, col);
    return a;
  }

  Rational probability() {
    if (cur_.kind != Token::Number) fail("expected a probability");
    Rational p = cur_.value;
    advance();
    if (cur_.kind == Token::Slash) {
      advance();
      if (cur_.kind != Token::Number) fail("expected a denominator");
      Rational d = cur_.value;
      advance();
      if (d.num == 0) fail("zero denominator");
      __int128 num = __int128(p.num) * d.den;
      __int128 den = __int128(p.den) * d.num;
      if (num > INT64_MAX || den > INT64_MAX) fail("fraction overflow");
      p.num = (long long)(num);
      p.den = (long long)(den);
      p.reduce();
    }
    if (p.num <= 0 || p.value() > 1.0 + 1e-9)
      fail("probability must lie in (0, 1]");
    return p;
  }

  Literal literal() {
    Literal l;
    if (cur_.kind == Token::Ident && cur_.text == "not") {
      // Peek: 'not' immediately followed by '(' is negation, else a plain
      // atom named not.
      Token saved = cur_;
      advance();
      if (cur_.kind == Token::LPar) {
        advance();
        l.negated = true;
        l.atom = atom();
        expect(Token::RPar, "')'");
        if (l.atom.pred == "false") fail("'false' cannot appear in a body");
        return l;
      }
      l.atom.pred = saved.text;
      check_arity(l.atom, saved.line, saved.col);
      return l;
    }
    l.atom = atom();
    if (l.atom.pred == "false") fail("'false' cannot appear in a body");
    return l;
  }

  CpRule clause() {
    CpRule r;
    r.line = cur_.line;
    r.col = cur_.col;

    bool constraint = false;
    if (cur_.kind == Token::Number) {
      while (true) {
        HeadChoice h;
        h.prob = probability();
        expect(Token::Prob, "'::'");
        h.atom = atom();
        if (h.atom.pred == "false") fail("'false' cannot carry a probability");
        r.head.push_back(h);
        if (cur_.kind == Token::Semi) { advance();
          if (cur_.kind != Token::Number) fail("every disjunct needs a probability");
          continue; }
        break;
      }
    } else {
      Atom a = atom();
      if (a.pred == "false") {
        constraint = true;
      } else {
        r.head.push_back({Rational{1, 1}, a});
      }
      if (cur_.kind == Token::Semi) fail("every disjunct needs a probability");
    }

    if (constraint) {
      r.kind = RuleKind::constraint;
    } else if (r.head.size() == 1 && r.head[0].prob.num == r.head[0].prob.den) {
      r.kind = RuleKind::deterministic;
    } else {
      r.kind = RuleKind::annotated_disjunction;
    }

    Rational sum{0, 1};
    for (const auto& h : r.head) sum = add(sum, h.prob);
    if (sum.value() > 1.0 + 1e-9)
      throw InputError("line " + std::to_string(r.line) + ", col " +
                       std::to_string(r.col) + ": head probabilities sum to " +
                       std::to_string(sum.value()));
    r.closed = !r.head.empty() && sum.num >= sum.den;

    if (cur_.kind == Token::Arrow) {
      advance();
      while (true) {
        r.body.push_back(literal());
        if (cur_.kind == Token::Comma) { advance(); continue; }
        break;
      }
    } else if (constraint) {
      // A bare "false." empties every world; legal, if pointless.
    }
    expect(Token::Dot, "'.'");
    return r;
  }

  Lexer lex_;
  Token cur_;
  std::map<std::string, std::size_t> arity_;
};

}  // namespace detail

inline CpProgram parse_program(const std::string& text) {
  return detail::Parser(text).parse();
}

// ---------------------------------------------------------------------------
// Ground program

struct GroundHead {
  double prob = 1.0;
  int atom = -1;
  int stratum = 0;
};

struct GroundLiteral {
  int atom = -1;
  bool negated = false;
};

struct GroundRule {
  RuleKind kind = RuleKind::deterministic;
  std::vector<GroundHead> head;  // empty for constraints
  std::vector<GroundLiteral> body;
  bool closed = true;
};

struct GroundProgram {
  std::vector<std::string> atoms;        // id -> canonical text
  std::map<std::string, int> atom_ids;   // canonical text -> id
  std::vector<GroundRule> rules;
  std::vector<std::string> constants;
  int num_strata = 1;

  int id_of(const std::string& text) const {
    auto it = atom_ids.find(text);
    return it == atom_ids.end() ? -1 : it->second;
  }
  int num_ad_instances() const {
    int n = 0;
    for (const auto& r : rules)
      if (r.kind == RuleKind::annotated_disjunction) ++n;
    return n;
  }
};

namespace detail {

// Predicate-level stratification.  Returns stratum per predicate; throws with
// the offending cycle if a predicate depends on itself through a negation.
inline std::map<std::string, int> stratify(const CpProgram& prog) {
  std::map<std::string, std::set<std::pair<std::string, bool>>> deps;
  std::set<std::string> preds;
  for (const auto& r : prog.rules) {
    std::vector<std::string> heads;
    if (r.kind == RuleKind::constraint) heads.push_back("false");
    for (const auto& h : r.head) heads.push_back(h.atom.pred);
    for (const auto& l : r.body) preds.insert(l.atom.pred);
    for (const auto& hp : heads) {
      preds.insert(hp);
      for (const auto& l : r.body) deps[hp].insert({l.atom.pred, l.negated});
    }
  }

  // Iterative stratum assignment; with P predicates any legal assignment
  // stabilizes within P rounds, so a change in round P+1 proves a negative
  // cycle.
  std::map<std::string, int> stratum;
  for (const auto& p : preds) stratum[p] = 0;
  int rounds = int(preds.size()) + 1;
  for (int round = 0; round <= rounds; ++round) {
    bool changed = false;
    for (const auto& [p, ds] : deps)
      for (const auto& [q, neg] : ds) {
        int need = stratum[q] + (neg ? 1 : 0);
        if (stratum[p] < need) { stratum[p] = need; changed = true; }
      }
    if (!changed) return stratum;
  }

  // Recover one negative cycle for the report: walk maximal-stratum deps.
  std::string at;
  int hi = -1;
  for (const auto& [p, s] : stratum)
    if (s > hi) { hi = s; at = p; }
  std::set<std::string> seen{at};
  std::string msg = "unstratified negation through: " + at;
  for (int i = 0; i < int(preds.size()); ++i) {
    bool stepped = false;
    for (const auto& [q, neg] : deps[at]) {
      if (stratum[q] + (neg ? 1 : 0) == stratum[at] || neg) {
        at = q;
        msg += (neg ? " -not-> " : " -> ") + at;
        stepped = true;
        break;
      }
    }
    if (!stepped || seen.count(at)) break;
    seen.insert(at);
  }
  throw InputError(msg);
}

inline void check_safety(const CpRule& r) {
  std::set<std::string> positive;
  for (const auto& l : r.body)
    if (!l.negated)
      for (const auto& t : l.atom.args)
        if (is_variable(t)) positive.insert(t);
  auto require = [&](const Atom& a, const char* where) {
    for (const auto& t : a.args)
      if (is_variable(t) && !positive.count(t))
        throw InputError("line " + std::to_string(r.line) + ": variable " + t +
                         " in " + where + " is not bound by a positive body literal");
  };
  for (const auto& h : r.head) require(h.atom, "the head");
  for (const auto& l : r.body)
    if (l.negated) require(l.atom, "a negated literal");
}

using Binding = std::map<std::string, std::string>;

inline Atom substitute(const Atom& a, const Binding& b) {
  Atom out;
  out.pred = a.pred;
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) {
    if (is_variable(t)) {
      auto it = b.find(t);
      out.args.push_back(it == b.end() ? t : it->second);
    } else {
      out.args.push_back(t);
    }
  }
  return out;
}

}  // namespace detail

inline GroundProgram ground(const CpProgram& prog) {
  auto strata = detail::stratify(prog);
  for (const auto& r : prog.rules) detail::check_safety(r);

  GroundProgram gp;
  gp.constants = prog.constants;
  auto intern = [&gp](const Atom& a) {
    std::string text = a.str();
    auto [it, fresh] = gp.atom_ids.try_emplace(text, int(gp.atoms.size()));
    if (fresh) gp.atoms.push_back(text);
    return it->second;
  };

  // Possibly-true closure: a rule instance exists only where every positive
  // body literal can be matched against atoms some world might derive.
  // Negative literals never block during this phase.
  std::map<std::string, std::vector<std::vector<std::string>>> possibly;
  std::set<std::string> possibly_texts;
  std::set<std::string> instance_keys;
  struct Pending { const CpRule* rule; detail::Binding binding; };
  std::vector<Pending> instances;

  auto add_possible = [&](const Atom& a) {
    std::string text = a.str();
    if (possibly_texts.insert(text).second) {
      possibly[a.pred].push_back(a.args);
      return true;
    }
    return false;
  };

  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& r : prog.rules) {
      std::vector<const Literal*> pos;
      for (const auto& l : r.body)
        if (!l.negated) pos.push_back(&l);

      // Depth-first join over the positive body.
      std::vector<detail::Binding> found;
      std::function<void(std::size_t, detail::Binding&)> join =
          [&](std::size_t li, detail::Binding& binding) {
            if (li == pos.size()) { found.push_back(binding); return; }
            const Atom& a = pos[li]->atom;
            auto it = possibly.find(a.pred);
            if (it == possibly.end()) return;
            for (const auto& cand : it->second) {
              if (cand.size() != a.args.size()) continue;
              detail::Binding saved = binding;
              bool ok = true;
              for (std::size_t k = 0; k < cand.size() && ok; ++k) {
                const std::string& t = a.args[k];
                if (is_variable(t)) {
                  auto bt = binding.find(t);
                  if (bt == binding.end()) binding[t] = cand[k];
                  else if (bt->second != cand[k]) ok = false;
                } else if (t != cand[k]) {
                  ok = false;
                }
              }
              if (ok) join(li + 1, binding);
              binding = std::move(saved);
            }
          };
      detail::Binding empty;
      join(0, empty);

      for (auto& binding : found) {
        std::string key = std::to_string(&r - prog.rules.data());
        for (const auto& [v, c] : binding) key += "|" + v + "=" + c;
        if (!instance_keys.insert(key).second) continue;
        instances.push_back({&r, binding});
        for (const auto& h : r.head)
          if (add_possible(detail::substitute(h.atom, binding))) grew = true;
      }
    }
  }

  // Definite atoms: derivable through deterministic rules alone in every
  // world.  not(a) counts as settled only when a is impossible outright.
  std::set<std::string> certain;
  bool more = true;
  while (more) {
    more = false;
    for (const auto& inst : instances) {
      if (inst.rule->kind != RuleKind::deterministic) continue;
      bool fires = true;
      for (const auto& l : inst.rule->body) {
        std::string text = detail::substitute(l.atom, inst.binding).str();
        if (l.negated ? possibly_texts.count(text) : !certain.count(text)) {
          fires = false;
          break;
        }
      }
      if (!fires) continue;
      std::string head = detail::substitute(inst.rule->head[0].atom,
                                            inst.binding).str();
      if (certain.insert(head).second) more = true;
    }
  }

  // Emit simplified instances.  Two textually identical source rules stay
  // two instances: each one is an independent cause.
  for (const auto& inst : instances) {
    GroundRule gr;
    gr.kind = inst.rule->kind;
    gr.closed = inst.rule->closed;
    bool drop = false;
    for (const auto& l : inst.rule->body) {
      Atom a = detail::substitute(l.atom, inst.binding);
      std::string text = a.str();
      if (!l.negated) {
        if (certain.count(text)) continue;          // always satisfied
        if (!possibly_texts.count(text)) { drop = true; break; }
      } else {
        if (!possibly_texts.count(text)) continue;  // can never fire
        if (certain.count(text)) { drop = true; break; }
      }
      gr.body.push_back({intern(a), l.negated});
    }
    if (drop) continue;
    for (const auto& h : inst.rule->head) {
      Atom a = detail::substitute(h.atom, inst.binding);
      gr.head.push_back({h.prob.value(), intern(a), strata[a.pred]});
    }
    gp.rules.push_back(std::move(gr));
  }

  int hi = 0;
  for (const auto& [p, s] : strata) hi = std::max(hi, s);
  gp.num_strata = hi + 1;
  return gp;
}

// ---------------------------------------------------------------------------
// Inference

struct Evidence {
  Atom atom;
  bool truth = true;
};

struct MarginalResult {
  std::vector<std::pair<std::string, double>> marginals;
  double evidence_mass = 1.0;
  // Sum over every enumerated world before conditioning; sanity value that
  // must come out as 1.
  double total_mass = 0.0;

  double prob(const std::string& atom_text) const {
    for (const auto& [a, p] : marginals)
      if (a == atom_text) return p;
    throw InputError("no marginal for " + atom_text);
  }
};

struct InferOptions {
  int budget = 25;        // max annotated-disjunction instances enumerated
  bool relevance = true;  // drop rules that cannot influence the goals
};

namespace detail {

// Keep constraints plus every rule that can reach a goal atom through heads.
inline std::vector<GroundRule> relevant_rules(const GroundProgram& gp,
                                              std::vector<char> relevant) {
  std::vector<char> kept(gp.rules.size(), 0);
  for (std::size_t i = 0; i < gp.rules.size(); ++i)
    if (gp.rules[i].kind == RuleKind::constraint) {
      kept[i] = 1;
      for (const auto& l : gp.rules[i].body) relevant[l.atom] = 1;
    }
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < gp.rules.size(); ++i) {
      if (kept[i]) continue;
      bool want = false;
      for (const auto& h : gp.rules[i].head)
        if (relevant[h.atom]) { want = true; break; }
      if (!want) continue;
      kept[i] = 1;
      grew = true;
      for (const auto& l : gp.rules[i].body)
        if (!relevant[l.atom]) { relevant[l.atom] = 1; grew = true; }
    }
  }
  std::vector<GroundRule> out;
  for (std::size_t i = 0; i < gp.rules.size(); ++i)
    if (kept[i]) out.push_back(gp.rules[i]);
  return out;
}

}  // namespace detail

inline MarginalResult infer(const GroundProgram& gp,
                            const std::vector<Evidence>& evidence,
                            const std::vector<Atom>& queries,
                            const InferOptions& opt = {}) {
  const int n_atoms = int(gp.atoms.size());

  std::vector<std::pair<int, bool>> ev;  // atom id, required truth
  for (const auto& e : evidence) {
    int id = gp.id_of(e.atom.str());
    if (id < 0)
      throw InferenceError("unknown evidence atom " + e.atom.str());
    ev.push_back({id, e.truth});
  }
  std::vector<int> qids;
  for (const auto& q : queries) qids.push_back(gp.id_of(q.str()));

  std::vector<GroundRule> rules;
  if (opt.relevance) {
    std::vector<char> roots(n_atoms, 0);
    for (const auto& [id, truth] : ev) roots[id] = 1;
    for (int id : qids)
      if (id >= 0) roots[id] = 1;
    rules = detail::relevant_rules(gp, std::move(roots));
  } else {
    rules = gp.rules;
  }

  std::vector<const GroundRule*> choices;     // annotated disjunctions
  std::vector<const GroundRule*> constraints;
  std::vector<std::vector<const GroundRule*>> det_by_stratum(gp.num_strata);
  for (const auto& r : rules) {
    if (r.kind == RuleKind::constraint) constraints.push_back(&r);
    else if (r.kind == RuleKind::annotated_disjunction) choices.push_back(&r);
    else det_by_stratum[r.head[0].stratum].push_back(&r);
  }
  if (int(choices.size()) > opt.budget)
    throw InferenceError("enumeration budget exceeded: " +
                         std::to_string(choices.size()) + " choice rules, " +
                         "budget " + std::to_string(opt.budget));

  // Outcome tables: every head plus, for open rules, the silent outcome.
  struct Outcome { double p; int atom; int stratum; };
  std::vector<std::vector<Outcome>> outcomes(choices.size());
  double world_count = 1.0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    double sum = 0.0;
    for (const auto& h : choices[i]->head) {
      outcomes[i].push_back({h.prob, h.atom, h.stratum});
      sum += h.prob;
    }
    if (!choices[i]->closed) outcomes[i].push_back({1.0 - sum, -1, 0});
    world_count *= double(outcomes[i].size());
  }
  if (world_count > 2e8)
    throw InferenceError("world count too large to enumerate");

  std::vector<int> pick(choices.size(), 0);
  std::vector<char> model(n_atoms, 0);
  std::vector<double> qmass(qids.size(), 0.0);
  double evidence_mass = 0.0, total_mass = 0.0;

  bool more = true;
  while (more) {
    double p = 1.0;
    for (std::size_t i = 0; i < pick.size(); ++i) p *= outcomes[i][pick[i]].p;

    if (p > 0.0) {
      std::fill(model.begin(), model.end(), 0);
      for (int s = 0; s < gp.num_strata; ++s) {
        bool changed = true;
        while (changed) {
          changed = false;
          for (const GroundRule* r : det_by_stratum[s]) {
            if (model[r->head[0].atom]) continue;
            bool fires = true;
            for (const auto& l : r->body)
              if (bool(model[l.atom]) == l.negated) { fires = false; break; }
            if (fires) { model[r->head[0].atom] = 1; changed = true; }
          }
          for (std::size_t i = 0; i < pick.size(); ++i) {
            const Outcome& o = outcomes[i][pick[i]];
            if (o.atom < 0 || o.stratum != s || model[o.atom]) continue;
            bool fires = true;
            for (const auto& l : choices[i]->body)
              if (bool(model[l.atom]) == l.negated) { fires = false; break; }
            if (fires) { model[o.atom] = 1; changed = true; }
          }
        }
      }

      total_mass += p;
      bool ok = true;
      for (const GroundRule* c : constraints) {
        bool fires = true;
        for (const auto& l : c->body)
          if (bool(model[l.atom]) == l.negated) { fires = false; break; }
        if (fires) { ok = false; break; }
      }
      if (ok)
        for (const auto& [id, truth] : ev)
          if (bool(model[id]) != truth) { ok = false; break; }
      if (ok) {
        evidence_mass += p;
        for (std::size_t qi = 0; qi < qids.size(); ++qi)
          if (qids[qi] >= 0 && model[qids[qi]]) qmass[qi] += p;
      }
    }

    // Next world.
    more = false;
    for (std::size_t d = 0; d < pick.size(); ++d) {
      if (++pick[d] < int(outcomes[d].size())) { more = true; break; }
      pick[d] = 0;
    }
  }

  if (evidence_mass <= 0.0)
    throw InferenceError("inconsistent evidence: no worlds remain");

  MarginalResult res;
  res.evidence_mass = evidence_mass;
  res.total_mass = total_mass;
  for (std::size_t qi = 0; qi < qids.size(); ++qi)
    res.marginals.push_back({queries[qi].str(), qmass[qi] / evidence_mass});
  return res;
}

// ---------------------------------------------------------------------------
// Family queries

struct DistributionResult {
  std::vector<std::pair<std::string, double>> probs;  // atom text -> P
  std::string argmax;
  bool tie = false;
  double evidence_mass = 1.0;
};

// Family: one predicate with exactly one variable argument; the distribution
// ranges over every ground atom in the program matching the fixed slots.
// Exclusive mode forbids two family atoms from holding at once (pairwise
// integrity constraints) and renormalizes the surviving marginals.
inline DistributionResult query_distribution(const CpProgram& prog,
                                             const std::vector<Evidence>& evidence,
                                             const Atom& family,
                                             bool exclusive,
                                             const InferOptions& opt = {}) {
  int open = -1;
  for (std::size_t i = 0; i < family.args.size(); ++i) {
    if (!is_variable(family.args[i])) continue;
    if (open >= 0) throw InputError("family needs exactly one open argument");
    open = int(i);
  }
  if (open < 0) throw InputError("family needs exactly one open argument");

  GroundProgram gp = ground(prog);

  std::vector<Atom> members;
  for (const auto& text : gp.atoms) {
    // Match pred + fixed args against the canonical rendering.
    auto lp = text.find('(');
    std::string pred = lp == std::string::npos ? text : text.substr(0, lp);
    if (pred != family.pred) continue;
    std::vector<std::string> args;
    if (lp != std::string::npos) {
      std::string inner = text.substr(lp + 1, text.size() - lp - 2);
      std::stringstream ss(inner);
      std::string part;
      while (std::getline(ss, part, ',')) args.push_back(part);
    }
    if (args.size() != family.args.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < args.size(); ++i)
      if (int(i) != open && args[i] != family.args[i]) { match = false; break; }
    if (!match) continue;
    Atom a;
    a.pred = pred;
    a.args = args;
    members.push_back(a);
  }
  if (members.empty())
    throw InputError("family " + family.str() + " matches no ground atom");
  std::sort(members.begin(), members.end(),
            [](const Atom& a, const Atom& b) { return a.str() < b.str(); });

  if (exclusive) {
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        GroundRule c;
        c.kind = RuleKind::constraint;
        c.body = {{gp.id_of(members[i].str()), false},
                  {gp.id_of(members[j].str()), false}};
        gp.rules.push_back(c);
      }
  }

  MarginalResult m = infer(gp, evidence, members, opt);

  DistributionResult out;
  out.evidence_mass = m.evidence_mass;
  out.probs = m.marginals;
  if (exclusive) {
    double sum = 0.0;
    for (const auto& [a, p] : out.probs) sum += p;
    if (sum <= 0.0)
      throw InferenceError("no probability mass on family " + family.str());
    for (auto& [a, p] : out.probs) p /= sum;
  }

  double best = -1.0;
  for (const auto& [a, p] : out.probs) best = std::max(best, p);
  int at_max = 0;
  for (const auto& [a, p] : out.probs)
    if (p >= best - 1e-12) {
      ++at_max;
      if (out.argmax.empty() || a < out.argmax) out.argmax = a;
    }
  out.tie = at_max > 1;
  return out;
}

inline DistributionResult query_distribution(const CpProgram& prog,
                                             const Atom& family,
                                             bool exclusive,
                                             const InferOptions& opt = {}) {
  return query_distribution(prog, {}, family, exclusive, opt);
}

}  // namespace plg::cpl
