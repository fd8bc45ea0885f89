#pragma once

// Co-safe LTL task formulas over robot/target propositions and their
// compilation into nondeterministic finite automata over finite traces.

#include <algorithm>
#include <cctype>
#include <compare>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "umbrella/common.hpp"

namespace umbrella {

// ---------------------------------------------------------------------------
// Atomic propositions
// ---------------------------------------------------------------------------

/// `reach(robot,target)` holds when the robot is within the reach threshold of the
/// target; `collab(target)` holds when collaboration `collab` is executed on the target.
struct AtomicProp {
  enum class Kind { Reach, Collab };

  Kind kind = Kind::Collab;
  std::string robot;   // Reach only
  std::string collab;  // Collab only
  std::string target;

  static AtomicProp reach(std::string robot, std::string target) {
    return {Kind::Reach, std::move(robot), {}, std::move(target)};
  }
  static AtomicProp collaboration(std::string collab, std::string target) {
    return {Kind::Collab, {}, std::move(collab), std::move(target)};
  }

  auto operator<=>(const AtomicProp&) const = default;
  bool operator==(const AtomicProp&) const = default;

  std::string to_string() const {
    if (kind == Kind::Reach) return "reach(" + robot + "," + target + ")";
    return collab + "(" + target + ")";
  }
};

/// One step of a trace: the set of propositions holding at that step.
using Letter = std::set<AtomicProp>;
using Trace = std::vector<Letter>;

// ---------------------------------------------------------------------------
// Formula AST (positive normal form; immutable, cheap to copy)
// ---------------------------------------------------------------------------

class Formula {
 public:
  enum class Op { True, Atom, NegAtom, And, Or, Next, Until, Eventually };

  static Formula truth() { return Formula(make(Op::True, {}, {})); }
  static Formula atom(AtomicProp p) { return Formula(make(Op::Atom, std::move(p), {})); }
  static Formula negated(AtomicProp p) { return Formula(make(Op::NegAtom, std::move(p), {})); }
  static Formula conj(Formula a, Formula b) { return Formula(make(Op::And, {}, {std::move(a), std::move(b)})); }
  static Formula disj(Formula a, Formula b) { return Formula(make(Op::Or, {}, {std::move(a), std::move(b)})); }
  static Formula next(Formula a) { return Formula(make(Op::Next, {}, {std::move(a)})); }
  static Formula until(Formula a, Formula b) { return Formula(make(Op::Until, {}, {std::move(a), std::move(b)})); }
  static Formula eventually(Formula a) { return Formula(make(Op::Eventually, {}, {std::move(a)})); }

  Formula() : Formula(truth()) {}

  Op op() const noexcept { return node_->op; }
  const AtomicProp& prop() const { return node_->prop; }
  const Formula& lhs() const { return node_->kids.at(0); }
  const Formula& rhs() const { return node_->kids.at(1); }
  const Formula& operand() const { return node_->kids.at(0); }

  bool is_literal() const noexcept { return op() == Op::Atom || op() == Op::NegAtom; }
  bool is_temporal() const noexcept {
    return op() == Op::Next || op() == Op::Until || op() == Op::Eventually;
  }

  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
      case Op::True:
        return true;
      case Op::Atom:
      case Op::NegAtom:
        return a.prop() == b.prop();
      case Op::Next:
      case Op::Eventually:
        return a.operand() == b.operand();
      default:
        return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    }
  }

  /// Canonical concrete syntax; parse(to_string()) reproduces the same AST.
  std::string to_string() const {
    switch (op()) {
      case Op::True:
        return "true";
      case Op::Atom:
        return prop().to_string();
      case Op::NegAtom:
        return "!" + prop().to_string();
      case Op::And:
        return "(" + lhs().to_string() + " & " + rhs().to_string() + ")";
      case Op::Or:
        return "(" + lhs().to_string() + " | " + rhs().to_string() + ")";
      case Op::Until:
        return "(" + lhs().to_string() + " U " + rhs().to_string() + ")";
      case Op::Next:
        return "X " + operand().to_string();
      case Op::Eventually:
        return "F " + operand().to_string();
    }
    return {};
  }

  /// Number of temporal operators in the formula.
  int temporal_depth() const {
    switch (op()) {
      case Op::True:
      case Op::Atom:
      case Op::NegAtom:
        return 0;
      case Op::Next:
      case Op::Eventually:
        return 1 + operand().temporal_depth();
      case Op::Until:
        return 1 + std::max(lhs().temporal_depth(), rhs().temporal_depth());
      default:
        return std::max(lhs().temporal_depth(), rhs().temporal_depth());
    }
  }

  void collect_props(std::set<AtomicProp>& out) const {
    switch (op()) {
      case Op::True:
        return;
      case Op::Atom:
      case Op::NegAtom:
        out.insert(prop());
        return;
      case Op::Next:
      case Op::Eventually:
        operand().collect_props(out);
        return;
      default:
        lhs().collect_props(out);
        rhs().collect_props(out);
    }
  }

  std::set<AtomicProp> props() const {
    std::set<AtomicProp> out;
    collect_props(out);
    return out;
  }

 private:
  struct Node {
    Op op;
    AtomicProp prop;
    std::vector<Formula> kids;
  };

  static std::shared_ptr<const Node> make(Op op, AtomicProp p, std::vector<Formula> kids) {
    return std::make_shared<const Node>(Node{op, std::move(p), std::move(kids)});
  }

  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

/// Conjunction of a list of formulas (true for an empty list).
inline Formula conjunction(std::span<const Formula> parts) {
  if (parts.empty()) return Formula::truth();
  Formula acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = Formula::conj(acc, parts[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Parser
//
//   formula := or
//   or      := and { "|" and }
//   and     := until { "&" until }
//   until   := unary [ "U" until ]
//   unary   := "F" unary | "X" unary | "!" unary | primary
//   primary := "(" formula ")" | "true" | atom
//   atom    := ident "(" ident { "," ident } ")"
//
// `reach(r,t)` is a reach proposition; any other `name(t)` is a collaboration.
// ---------------------------------------------------------------------------

namespace detail {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) { tokenize(); }

  Formula parse() {
    Formula f = parse_or();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'", peek());
    return f;
  }

 private:
  enum class Tok { Ident, LParen, RParen, Comma, And, Or, Not, End };
  struct Token {
    Tok kind;
    std::string text;
    int line;
    int column;
  };

  [[noreturn]] static void fail(const std::string& msg, const Token& t) {
    throw SyntaxError(msg, t.line, t.column);
  }

  void tokenize() {
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    while (i < text_.size()) {
      const char c = text_[i];
      if (c == '\n') {
        ++line;
        col = 1;
        ++i;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++col;
        ++i;
        continue;
      }
      const int start_col = col;
      auto single = [&](Tok k) {
        tokens_.push_back({k, std::string(1, c), line, start_col});
        ++i;
        ++col;
      };
      switch (c) {
        case '(':
          single(Tok::LParen);
          continue;
        case ')':
          single(Tok::RParen);
          continue;
        case ',':
          single(Tok::Comma);
          continue;
        case '&':
          single(Tok::And);
          continue;
        case '|':
          single(Tok::Or);
          continue;
        case '!':
          single(Tok::Not);
          continue;
        default:
          break;
      }
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_' || text_[j] == '-' ||
                text_[j] == '.')) {
          ++j;
        }
        tokens_.push_back({Tok::Ident, std::string(text_.substr(i, j - i)), line, start_col});
        col += static_cast<int>(j - i);
        i = j;
        continue;
      }
      throw SyntaxError(std::string("unexpected character '") + c + "'", line, start_col);
    }
    tokens_.push_back({Tok::End, "<end>", line, col});
  }

  const Token& peek() const { return tokens_[pos_]; }
  const Token& take() { return tokens_[pos_++]; }
  bool peek_keyword(std::string_view kw) const { return peek().kind == Tok::Ident && peek().text == kw; }

  Formula parse_or() {
    Formula f = parse_and();
    while (peek().kind == Tok::Or) {
      take();
      f = Formula::disj(f, parse_and());
    }
    return f;
  }

  Formula parse_and() {
    Formula f = parse_until();
    while (peek().kind == Tok::And) {
      take();
      f = Formula::conj(f, parse_until());
    }
    return f;
  }

  Formula parse_until() {
    Formula f = parse_unary();
    if (peek_keyword("U")) {
      take();
      return Formula::until(f, parse_until());
    }
    return f;
  }

  Formula parse_unary() {
    const Token& t = peek();
    if (t.kind == Tok::Ident && (t.text == "F" || t.text == "X")) {
      take();
      Formula sub = parse_unary();
      return t.text == "F" ? Formula::eventually(sub) : Formula::next(sub);
    }
    if (t.kind == Tok::Ident && t.text == "G") {
      throw NonCoSafeError("always operator 'G' at " + std::to_string(t.line) + ":" + std::to_string(t.column) +
                           " is only allowed through reactive rules");
    }
    if (t.kind == Tok::Not) {
      const Token& bang = take();
      Formula sub = parse_unary();
      if (sub.op() == Formula::Op::Atom) return Formula::negated(sub.prop());
      if (sub.temporal_depth() > 0) {
        throw NonCoSafeError("negation precedes a temporal operator at " + std::to_string(bang.line) + ":" +
                             std::to_string(bang.column));
      }
      fail("negation may only be applied to an atomic proposition", bang);
    }
    return parse_primary();
  }

  Formula parse_primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      take();
      Formula f = parse_or();
      if (peek().kind != Tok::RParen) fail("expected ')'", peek());
      take();
      return f;
    }
    if (t.kind != Tok::Ident) fail("expected a proposition, '(' or unary operator", t);
    if (t.text == "true") {
      take();
      return Formula::truth();
    }
    if (t.text == "U") fail("'U' is missing its left operand", t);
    const Token& name = take();
    if (peek().kind != Tok::LParen) fail("expected '(' after '" + name.text + "'", peek());
    take();
    std::vector<std::string> args;
    for (;;) {
      if (peek().kind != Tok::Ident) fail("expected identifier argument", peek());
      args.push_back(take().text);
      if (peek().kind == Tok::Comma) {
        take();
        continue;
      }
      if (peek().kind == Tok::RParen) {
        take();
        break;
      }
      fail("expected ',' or ')'", peek());
    }
    if (name.text == "reach") {
      if (args.size() != 2) fail("reach takes (robot, target)", name);
      return Formula::atom(AtomicProp::reach(args[0], args[1]));
    }
    if (args.size() != 1) fail("collaboration proposition '" + name.text + "' takes one target", name);
    return Formula::atom(AtomicProp::collaboration(name.text, args[0]));
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a co-safe LTL formula. Throws SyntaxError or NonCoSafeError.
inline Formula parse_scltl(std::string_view text) { return detail::FormulaParser(text).parse(); }

/// Identifiers a formula may refer to.
struct Declarations {
  std::set<std::string> robots;
  std::set<std::string> targets;
  std::set<std::string> collaborations;
};

/// Throws ScenarioError when the formula mentions an undeclared robot, target or collaboration.
inline void check_declared(const Formula& f, const Declarations& decl) {
  for (const AtomicProp& p : f.props()) {
    if (!decl.targets.contains(p.target)) throw ScenarioError("undeclared target '" + p.target + "' in " + p.to_string());
    if (p.kind == AtomicProp::Kind::Reach && !decl.robots.contains(p.robot)) {
      throw ScenarioError("undeclared robot '" + p.robot + "' in " + p.to_string());
    }
    if (p.kind == AtomicProp::Kind::Collab && !decl.collaborations.contains(p.collab)) {
      throw ScenarioError("undeclared collaboration '" + p.collab + "' in " + p.to_string());
    }
  }
}

// ---------------------------------------------------------------------------
// Automaton
// ---------------------------------------------------------------------------

struct Literal {
  AtomicProp prop;
  bool positive = true;
  auto operator<=>(const Literal&) const = default;
  bool operator==(const Literal&) const = default;
  std::string to_string() const { return (positive ? "" : "!") + prop.to_string(); }
};

/// Conjunction of literals; the empty conjunction is `true`.
struct Guard {
  std::vector<Literal> literals;  // sorted by proposition, at most one literal per proposition

  bool holds(const Letter& letter) const {
    return std::all_of(literals.begin(), literals.end(),
                       [&](const Literal& l) { return letter.contains(l.prop) == l.positive; });
  }
  bool is_true() const noexcept { return literals.empty(); }

  std::vector<AtomicProp> positives() const {
    std::vector<AtomicProp> out;
    for (const auto& l : literals)
      if (l.positive) out.push_back(l.prop);
    return out;
  }
  std::vector<AtomicProp> negatives() const {
    std::vector<AtomicProp> out;
    for (const auto& l : literals)
      if (!l.positive) out.push_back(l.prop);
    return out;
  }

  /// Conjunction of two guards, or nullopt when they contradict.
  static std::optional<Guard> combine(const Guard& a, const Guard& b) {
    Guard out;
    out.literals.reserve(a.literals.size() + b.literals.size());
    auto i = a.literals.begin();
    auto j = b.literals.begin();
    while (i != a.literals.end() || j != b.literals.end()) {
      if (j == b.literals.end() || (i != a.literals.end() && i->prop < j->prop)) {
        out.literals.push_back(*i++);
      } else if (i == a.literals.end() || j->prop < i->prop) {
        out.literals.push_back(*j++);
      } else {
        if (i->positive != j->positive) return std::nullopt;
        out.literals.push_back(*i);
        ++i;
        ++j;
      }
    }
    return out;
  }

  std::string to_string() const {
    if (literals.empty()) return "true";
    std::string s;
    for (std::size_t k = 0; k < literals.size(); ++k) {
      if (k) s += " & ";
      s += literals[k].to_string();
    }
    return s;
  }

  auto operator<=>(const Guard&) const = default;
  bool operator==(const Guard&) const = default;
};

struct Transition {
  int from = 0;
  Guard guard;
  int to = 0;
};

/// Nondeterministic automaton over finite traces. Immutable after construction.
class FiniteAutomaton {
 public:
  FiniteAutomaton() = default;
  FiniteAutomaton(std::vector<std::string> state_labels, std::vector<int> initial, std::vector<bool> accepting,
                  std::vector<Transition> transitions)
      : labels_(std::move(state_labels)),
        initial_(std::move(initial)),
        accepting_(std::move(accepting)),
        transitions_(std::move(transitions)) {
    std::sort(transitions_.begin(), transitions_.end(), [](const Transition& a, const Transition& b) {
      return std::tie(a.from, a.to, a.guard) < std::tie(b.from, b.to, b.guard);
    });
    outgoing_.assign(labels_.size(), {});
    for (std::size_t k = 0; k < transitions_.size(); ++k) outgoing_[transitions_[k].from].push_back(static_cast<int>(k));
  }

  std::size_t num_states() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  const std::vector<int>& initial() const noexcept { return initial_; }
  bool is_accepting(int s) const { return accepting_.at(s); }
  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  const std::vector<int>& outgoing(int s) const { return outgoing_.at(s); }
  const std::string& label(int s) const { return labels_.at(s); }

  std::vector<int> accepting_states() const {
    std::vector<int> out;
    for (std::size_t s = 0; s < accepting_.size(); ++s)
      if (accepting_[s]) out.push_back(static_cast<int>(s));
    return out;
  }

  std::set<AtomicProp> propositions() const {
    std::set<AtomicProp> out;
    for (const auto& t : transitions_)
      for (const auto& l : t.guard.literals) out.insert(l.prop);
    return out;
  }

  /// States reachable from `from` after reading one letter.
  std::vector<int> step(const std::vector<int>& from, const Letter& letter) const {
    std::vector<char> mark(num_states(), 0);
    for (int s : from)
      for (int k : outgoing_[s])
        if (transitions_[k].guard.holds(letter)) mark[transitions_[k].to] = 1;
    std::vector<int> out;
    for (std::size_t s = 0; s < mark.size(); ++s)
      if (mark[s]) out.push_back(static_cast<int>(s));
    return out;
  }

  bool any_accepting(const std::vector<int>& states) const {
    return std::any_of(states.begin(), states.end(), [&](int s) { return accepting_[s]; });
  }

  /// True iff some run over the trace ends in an accepting state.
  bool accepts(std::span<const Letter> trace) const {
    std::vector<int> current = initial_;
    for (const Letter& l : trace) {
      current = step(current, l);
      if (current.empty()) return false;
    }
    return any_accepting(current);
  }

 private:
  std::vector<std::string> labels_;
  std::vector<int> initial_;
  std::vector<bool> accepting_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<int>> outgoing_;
};

namespace detail {

// States of the construction are sets of pending obligations (subformulas that
// must hold from the next position on). Reading a letter expands each obligation
// into guarded successor obligations; a state accepts when every obligation can
// be discharged by the empty suffix.
class AutomatonBuilder {
 public:
  explicit AutomatonBuilder(std::size_t max_states) : max_states_(max_states) {}

  FiniteAutomaton build(const Formula& f) {
    using State = std::vector<int>;
    std::map<State, int> ids;
    std::vector<State> states;
    std::deque<int> work;
    std::vector<Transition> transitions;

    auto intern_state = [&](State s) {
      auto [it, inserted] = ids.emplace(s, static_cast<int>(states.size()));
      if (inserted) {
        if (states.size() >= max_states_) {
          throw CapacityError("automaton exceeds " + std::to_string(max_states_) + " states");
        }
        states.push_back(std::move(s));
        work.push_back(it->second);
      }
      return it->second;
    };

    State init;
    flatten(f, init);
    normalize(init);
    const int init_id = intern_state(init);

    while (!work.empty()) {
      const int sid = work.front();
      work.pop_front();
      const State current = states[sid];
      for (auto& [guard, succ] : expand_state(current)) {
        const int to = intern_state(std::move(succ));
        transitions.push_back({sid, std::move(guard), to});
      }
    }

    // Prune states that cannot reach an accepting state.
    const std::size_t n = states.size();
    std::vector<bool> accepting(n);
    for (std::size_t s = 0; s < n; ++s) accepting[s] = nullable_state(states[s]);
    std::vector<std::vector<int>> reverse(n);
    for (const auto& t : transitions) reverse[t.to].push_back(t.from);
    std::vector<bool> live(n, false);
    std::deque<int> q;
    for (std::size_t s = 0; s < n; ++s)
      if (accepting[s]) {
        live[s] = true;
        q.push_back(static_cast<int>(s));
      }
    while (!q.empty()) {
      const int s = q.front();
      q.pop_front();
      for (int p : reverse[s])
        if (!live[p]) {
          live[p] = true;
          q.push_back(p);
        }
    }
    std::vector<int> remap(n, -1);
    std::vector<std::string> labels;
    std::vector<bool> acc;
    for (std::size_t s = 0; s < n; ++s) {
      if (!live[s]) continue;
      remap[s] = static_cast<int>(labels.size());
      labels.push_back(state_label(states[s]));
      acc.push_back(accepting[s]);
    }
    std::vector<Transition> kept;
    for (auto& t : transitions) {
      if (remap[t.from] < 0 || remap[t.to] < 0) continue;
      kept.push_back({remap[t.from], std::move(t.guard), remap[t.to]});
    }
    std::vector<int> initial;
    if (remap[init_id] >= 0) initial.push_back(remap[init_id]);
    return FiniteAutomaton(std::move(labels), std::move(initial), std::move(acc), std::move(kept));
  }

 private:
  using Expansion = std::vector<std::pair<Guard, std::vector<int>>>;

  int intern(const Formula& f) {
    const std::string key = f.to_string();
    auto [it, inserted] = element_ids_.emplace(key, static_cast<int>(elements_.size()));
    if (inserted) elements_.push_back(f);
    return it->second;
  }

  // Splits top-level conjunctions into separate obligations; `true` disappears.
  void flatten(const Formula& f, std::vector<int>& out) {
    if (f.op() == Formula::Op::True) return;
    if (f.op() == Formula::Op::And) {
      flatten(f.lhs(), out);
      flatten(f.rhs(), out);
      return;
    }
    out.push_back(intern(f));
  }

  static void normalize(std::vector<int>& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }

  bool nullable(const Formula& f) const {
    switch (f.op()) {
      case Formula::Op::True:
        return true;
      case Formula::Op::Atom:
      case Formula::Op::NegAtom:
      case Formula::Op::Next:
        return false;
      case Formula::Op::And:
        return nullable(f.lhs()) && nullable(f.rhs());
      case Formula::Op::Or:
        return nullable(f.lhs()) || nullable(f.rhs());
      case Formula::Op::Until:
        return nullable(f.rhs());
      case Formula::Op::Eventually:
        return nullable(f.operand());
    }
    return false;
  }

  bool nullable_state(const std::vector<int>& s) const {
    return std::all_of(s.begin(), s.end(), [&](int e) { return nullable(elements_[e]); });
  }

  std::string state_label(const std::vector<int>& s) const {
    if (s.empty()) return "{}";
    std::string out = "{";
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k) out += ", ";
      out += elements_[s[k]].to_string();
    }
    return out + "}";
  }

  static Expansion product(const Expansion& a, const Expansion& b) {
    Expansion out;
    for (const auto& [ga, sa] : a)
      for (const auto& [gb, sb] : b) {
        auto g = Guard::combine(ga, gb);
        if (!g) continue;
        std::vector<int> s = sa;
        s.insert(s.end(), sb.begin(), sb.end());
        normalize(s);
        out.emplace_back(std::move(*g), std::move(s));
      }
    dedupe(out);
    return out;
  }

  static void dedupe(Expansion& e) {
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
  }

  const Expansion& expand(int id) {
    if (auto it = memo_.find(id); it != memo_.end()) return it->second;
    const Formula f = elements_[id];
    Expansion out;
    switch (f.op()) {
      case Formula::Op::True:
        out.push_back({Guard{}, {}});
        break;
      case Formula::Op::Atom:
        out.push_back({Guard{{Literal{f.prop(), true}}}, {}});
        break;
      case Formula::Op::NegAtom:
        out.push_back({Guard{{Literal{f.prop(), false}}}, {}});
        break;
      case Formula::Op::And:
        out = product(expand(intern(f.lhs())), expand(intern(f.rhs())));
        break;
      case Formula::Op::Or: {
        out = expand(intern(f.lhs()));
        const Expansion& r = expand(intern(f.rhs()));
        out.insert(out.end(), r.begin(), r.end());
        break;
      }
      case Formula::Op::Next: {
        std::vector<int> succ;
        flatten(f.operand(), succ);
        normalize(succ);
        out.push_back({Guard{}, std::move(succ)});
        break;
      }
      case Formula::Op::Until: {
        out = expand(intern(f.rhs()));
        for (auto [g, s] : expand(intern(f.lhs()))) {
          s.push_back(id);
          normalize(s);
          out.emplace_back(std::move(g), std::move(s));
        }
        break;
      }
      case Formula::Op::Eventually:
        out = expand(intern(f.operand()));
        out.push_back({Guard{}, {id}});
        break;
    }
    dedupe(out);
    return memo_.emplace(id, std::move(out)).first->second;
  }

  Expansion expand_state(const std::vector<int>& state) {
    Expansion acc{{Guard{}, {}}};
    for (int e : state) acc = product(acc, expand(e));
    return acc;
  }

  std::size_t max_states_;
  std::vector<Formula> elements_;
  std::unordered_map<std::string, int> element_ids_;
  std::unordered_map<int, Expansion> memo_;
};

}  // namespace detail

inline constexpr std::size_t kDefaultMaxAutomatonStates = 100000;

/// Compiles a formula into an automaton accepting exactly the finite traces that satisfy it.
/// Dead states are pruned, so an unsatisfiable formula yields an empty automaton.
inline FiniteAutomaton to_automaton(const Formula& f, std::size_t max_states = kDefaultMaxAutomatonStates) {
  return detail::AutomatonBuilder(max_states).build(f);
}

inline bool accepts(const FiniteAutomaton& a, std::span<const Letter> trace) { return a.accepts(trace); }

}  // namespace umbrella
