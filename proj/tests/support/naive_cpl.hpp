#pragma once

// Brute-force reference for the CP-rule engine.  Grounds every rule over the
// full constant set with no support filtering or simplification, enumerates
// outcome assignments recursively, and evaluates each world with a textbook
// stratified fixpoint.  Shares only the parsed AST with the engine; all
// inference machinery here is written and maintained separately so it can
// serve as an independent oracle in equivalence tests.
//
// Assumes its input is valid (safe, stratified): invalid programs are the
// engine's job to reject.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "plg/cpl.hpp"

namespace naive {

struct NaiveResult {
  std::map<std::string, double> marginals;
  double evidence_mass = 0.0;
  double total_mass = 0.0;
  bool inconsistent = false;
};

namespace detail {

struct GRule {
  plg::cpl::RuleKind kind;
  bool closed = true;
  std::vector<std::pair<double, std::string>> heads;  // prob, atom text
  std::vector<std::string> head_preds;
  std::vector<std::pair<std::string, bool>> body;  // atom text, negated
  std::vector<std::string> body_preds;
};

inline std::string subst_text(const plg::cpl::Atom& a,
                              const std::map<std::string, std::string>& b) {
  plg::cpl::Atom out;
  out.pred = a.pred;
  for (const auto& t : a.args) {
    auto it = b.find(t);
    out.args.push_back(it == b.end() ? t : it->second);
  }
  return out.str();
}

}  // namespace detail

inline NaiveResult naive_infer(const plg::cpl::CpProgram& prog,
                               const std::vector<plg::cpl::Evidence>& evidence,
                               const std::vector<std::string>& queries) {
  using plg::cpl::RuleKind;

  // Full grounding: every variable ranges over every constant.
  std::vector<detail::GRule> rules;
  for (const auto& r : prog.rules) {
    std::set<std::string> vars;
    for (const auto& h : r.head)
      for (const auto& t : h.atom.args)
        if (plg::cpl::is_variable(t)) vars.insert(t);
    for (const auto& l : r.body)
      for (const auto& t : l.atom.args)
        if (plg::cpl::is_variable(t)) vars.insert(t);
    std::vector<std::string> vlist(vars.begin(), vars.end());
    if (!vlist.empty() && prog.constants.empty()) continue;

    std::vector<std::size_t> pos(vlist.size(), 0);
    while (true) {
      std::map<std::string, std::string> binding;
      for (std::size_t i = 0; i < vlist.size(); ++i)
        binding[vlist[i]] = prog.constants[pos[i]];
      detail::GRule g;
      g.kind = r.kind;
      g.closed = r.closed;
      for (const auto& h : r.head) {
        g.heads.push_back({h.prob.value(), detail::subst_text(h.atom, binding)});
        g.head_preds.push_back(h.atom.pred);
      }
      for (const auto& l : r.body) {
        g.body.push_back({detail::subst_text(l.atom, binding), l.negated});
        g.body_preds.push_back(l.atom.pred);
      }
      rules.push_back(std::move(g));

      // Odometer over bindings; a variable-free rule exits after one pass.
      std::size_t d = 0;
      for (; d < pos.size(); ++d) {
        if (++pos[d] < prog.constants.size()) break;
        pos[d] = 0;
      }
      if (d == pos.size()) break;
    }
  }

  // Predicate levels by relaxation; terminates because inputs are stratified.
  std::map<std::string, int> level;
  for (const auto& g : rules) {
    for (const auto& p : g.head_preds) level[p];
    for (const auto& p : g.body_preds) level[p];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& g : rules) {
      for (std::size_t b = 0; b < g.body.size(); ++b) {
        int need = level[g.body_preds[b]] + (g.body[b].second ? 1 : 0);
        if (g.kind == RuleKind::constraint) continue;
        for (const auto& hp : g.head_preds)
          if (level[hp] < need) { level[hp] = need; changed = true; }
      }
    }
  }
  int max_level = 0;
  for (const auto& [p, s] : level) max_level = std::max(max_level, s);

  std::vector<std::size_t> ad_rules;
  for (std::size_t i = 0; i < rules.size(); ++i)
    if (rules[i].kind == RuleKind::annotated_disjunction) ad_rules.push_back(i);

  NaiveResult res;
  std::map<std::string, double> qmass;
  for (const auto& q : queries) qmass[q] = 0.0;

  // choice[d]: index into heads, or heads.size() for the silent outcome.
  std::vector<std::size_t> choice(ad_rules.size(), 0);

  auto evaluate = [&](double p) {
    std::set<std::string> model;
    for (int s = 0; s <= max_level; ++s) {
      bool grew = true;
      while (grew) {
        grew = false;
        std::size_t ad = 0;
        for (std::size_t i = 0; i < rules.size(); ++i) {
          const detail::GRule& g = rules[i];
          if (g.kind == RuleKind::constraint) continue;
          std::size_t hidx = 0;
          if (g.kind == RuleKind::annotated_disjunction) {
            hidx = choice[ad++];
            if (hidx >= g.heads.size()) continue;  // silent outcome
          }
          if (level[g.head_preds[hidx]] != s) continue;
          if (model.count(g.heads[hidx].second)) continue;
          bool sat = true;
          for (const auto& [text, neg] : g.body)
            if (model.count(text) == std::size_t(neg)) { sat = false; break; }
          if (sat) {
            model.insert(g.heads[hidx].second);
            grew = true;
          }
        }
      }
    }

    res.total_mass += p;
    for (const auto& g : rules) {
      if (g.kind != RuleKind::constraint) continue;
      bool sat = true;
      for (const auto& [text, neg] : g.body)
        if (model.count(text) == std::size_t(neg)) { sat = false; break; }
      if (sat) return;  // violated world
    }
    for (const auto& e : evidence)
      if (model.count(e.atom.str()) != std::size_t(e.truth)) return;
    res.evidence_mass += p;
    for (auto& [q, m] : qmass)
      if (model.count(q)) m += p;
  };

  std::function<void(std::size_t, double)> enumerate =
      [&](std::size_t d, double p) {
        if (p == 0.0) return;
        if (d == ad_rules.size()) { evaluate(p); return; }
        const detail::GRule& g = rules[ad_rules[d]];
        double sum = 0.0;
        for (std::size_t h = 0; h < g.heads.size(); ++h) {
          choice[d] = h;
          enumerate(d + 1, p * g.heads[h].first);
          sum += g.heads[h].first;
        }
        if (!g.closed) {
          choice[d] = g.heads.size();
          enumerate(d + 1, p * (1.0 - sum));
        }
      };
  enumerate(0, 1.0);

  if (res.evidence_mass <= 0.0) {
    res.inconsistent = true;
    return res;
  }
  for (const auto& q : queries) res.marginals[q] = qmass[q] / res.evidence_mass;
  return res;
}

}  // namespace naive
