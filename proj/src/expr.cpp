#include "ngmpn/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <utility>

namespace ngmpn {

struct Expr::Node {
  Op op = Op::Constant;
  double number = 0.0;
  std::string name;
  std::vector<Expr> args;
};

Expr::Expr() : Expr(std::make_shared<const Node>()) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::Constant;
  n->number = value;
  return Expr(std::move(n));
}

Expr Expr::symbol(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Symbol;
  n->name = std::move(name);
  return Expr(std::move(n));
}

namespace {

std::vector<Expr> flatten(Op op, std::vector<Expr> items) {
  std::vector<Expr> out;
  out.reserve(items.size());
  for (auto& item : items) {
    if (item.op() == op) {
      auto inner = item.args();
      out.insert(out.end(), inner.begin(), inner.end());
    } else {
      out.push_back(std::move(item));
    }
  }
  return out;
}

}  // namespace

Expr Expr::add(std::vector<Expr> terms) {
  terms = flatten(Op::Add, std::move(terms));
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  auto n = std::make_shared<Node>();
  n->op = Op::Add;
  n->args = std::move(terms);
  return Expr(std::move(n));
}

Expr Expr::mul(std::vector<Expr> factors) {
  factors = flatten(Op::Mul, std::move(factors));
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  auto n = std::make_shared<Node>();
  n->op = Op::Mul;
  n->args = std::move(factors);
  return Expr(std::move(n));
}

Expr Expr::sub(Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->op = Op::Sub;
  n->args = {std::move(lhs), std::move(rhs)};
  return Expr(std::move(n));
}

Expr Expr::div(Expr num, Expr den) {
  auto n = std::make_shared<Node>();
  n->op = Op::Div;
  n->args = {std::move(num), std::move(den)};
  return Expr(std::move(n));
}

Expr Expr::pow(Expr base, double exponent) {
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->number = exponent;
  n->args = {std::move(base)};
  return Expr(std::move(n));
}

Expr Expr::neg(Expr operand) {
  auto n = std::make_shared<Node>();
  n->op = Op::Neg;
  n->args = {std::move(operand)};
  return Expr(std::move(n));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::number() const noexcept { return node_->number; }
const std::string& Expr::name() const noexcept { return node_->name; }
std::span<const Expr> Expr::args() const noexcept { return node_->args; }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Binding strength used to decide where parentheses are needed.
int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Pow:
      return 4;
    case Op::Constant:
      return std::signbit(e.number()) ? 3 : 5;
    case Op::Symbol:
      return 5;
  }
  return 5;
}

void print(const Expr& e, std::string& out);

void print_operand(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

void print(const Expr& e, std::string& out) {
  auto args = e.args();
  switch (e.op()) {
    case Op::Constant:
      out += format_number(e.number());
      break;
    case Op::Symbol:
      out += e.name();
      break;
    case Op::Add:
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i > 0) out += " + ";
        print_operand(args[i], i == 0 ? 1 : 2, out);
      }
      break;
    case Op::Sub:
      print_operand(args[0], 1, out);
      out += " - ";
      print_operand(args[1], 2, out);
      break;
    case Op::Mul:
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i > 0) out += '*';
        print_operand(args[i], i == 0 ? 2 : 3, out);
      }
      break;
    case Op::Div:
      print_operand(args[0], 2, out);
      out += '/';
      print_operand(args[1], 3, out);
      break;
    case Op::Pow:
      print_operand(args[0], 5, out);
      out += '^';
      out += format_number(e.number());
      break;
    case Op::Neg:
      out += '-';
      print_operand(args[0], 3, out);
      break;
  }
}

}  // namespace

std::string Expr::str() const {
  std::string out;
  print(*this, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_ws();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Expr e = expression();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  // expression := term (('+' | '-') term)*
  Expr expression() {
    Expr acc = term();
    std::vector<Expr> sum;  // pending n-ary Add chain
    for (;;) {
      if (accept('+')) {
        if (sum.empty()) sum.push_back(acc);
        sum.push_back(term());
      } else if (accept('-')) {
        if (!sum.empty()) acc = Expr::add(std::exchange(sum, {}));
        acc = Expr::sub(acc, term());
      } else {
        break;
      }
    }
    return sum.empty() ? acc : Expr::add(std::move(sum));
  }

  // term := unary (('*' | '/') unary)*
  Expr term() {
    Expr acc = unary();
    std::vector<Expr> product;
    for (;;) {
      if (accept('*')) {
        if (product.empty()) product.push_back(acc);
        product.push_back(unary());
      } else if (accept('/')) {
        if (!product.empty()) acc = Expr::mul(std::exchange(product, {}));
        acc = Expr::div(acc, unary());
      } else {
        break;
      }
    }
    return product.empty() ? acc : Expr::mul(std::move(product));
  }

  // unary := '-' unary | '+' unary | power
  Expr unary() {
    if (accept('-')) return Expr::neg(unary());
    if (accept('+')) return unary();
    return power();
  }

  // power := primary ('^' unary)?   -- the exponent must fold to a constant
  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      std::size_t at = pos_;
      Expr exponent = unary();
      std::optional<double> value = fold_constant(exponent);
      if (!value) throw ParseError("exponent must be a numeric constant", at);
      return Expr::pow(base, *value);
    }
    return base;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expression();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      return Expr::symbol(std::string(text_.substr(start, pos_ - start)));
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = save;  // 'e' belongs to whatever follows; let the caller reject it
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) throw ParseError("malformed number", start);
    return Expr::constant(value);
  }

  static std::optional<double> fold_constant(const Expr& e) {
    if (!free_symbols(e).empty()) return std::nullopt;
    try {
      return eval(e, Bindings{});
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

double Bindings::get(std::string_view name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw UnboundSymbol(std::string(name));
  return it->second;
}

namespace {

double checked_div(double num, double den) {
  if (den == 0.0) throw DivisionByZero("division by zero");
  return num / den;
}

double checked_pow(double base, double exponent) {
  if (base == 0.0 && exponent < 0.0) throw DivisionByZero("zero raised to a negative power");
  if (base < 0.0 && exponent != std::floor(exponent))
    throw DomainError("negative base raised to a non-integer power");
  return std::pow(base, exponent);
}

}  // namespace

double eval(const Expr& e, const Bindings& b) {
  auto args = e.args();
  switch (e.op()) {
    case Op::Constant:
      return e.number();
    case Op::Symbol:
      return b.get(e.name());
    case Op::Add: {
      double s = 0.0;
      for (const auto& a : args) s += eval(a, b);
      return s;
    }
    case Op::Sub:
      return eval(args[0], b) - eval(args[1], b);
    case Op::Mul: {
      double p = 1.0;
      for (const auto& a : args) p *= eval(a, b);
      return p;
    }
    case Op::Div: {
      double num = eval(args[0], b);
      return checked_div(num, eval(args[1], b));
    }
    case Op::Pow:
      return checked_pow(eval(args[0], b), e.number());
    case Op::Neg:
      return -eval(args[0], b);
  }
  return 0.0;
}

std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  auto walk = [&](auto& self, const Expr& x) -> void {
    if (x.op() == Op::Symbol) out.insert(x.name());
    for (const auto& a : x.args()) self(self, a);
  };
  walk(walk, e);
  return out;
}

bool depends_on(const Expr& e, std::string_view symbol, const Aggregates& aggregates) {
  if (e.op() == Op::Symbol) {
    if (e.name() == symbol) return true;
    auto it = aggregates.find(e.name());
    return it != aggregates.end() && it->second.count(std::string(symbol)) > 0;
  }
  for (const auto& a : e.args())
    if (depends_on(a, symbol, aggregates)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

struct Term {
  double coef;
  std::optional<Expr> monomial;  // empty for a pure constant
};

// Factors of a monomial, in order, without a numeric coefficient.
std::vector<Expr> factors_of(const Expr& m) {
  if (m.op() == Op::Mul) return {m.args().begin(), m.args().end()};
  return {m};
}

std::string monomial_key(const Expr& m) {
  std::vector<std::string> keys;
  for (const auto& f : factors_of(m)) keys.push_back(f.str());
  std::sort(keys.begin(), keys.end());
  std::string key;
  for (const auto& k : keys) key += k + '\x1f';
  return key;
}

// Splits an already simplified expression into coefficient and monomial.
Term as_term(const Expr& e) {
  switch (e.op()) {
    case Op::Constant:
      return {e.number(), std::nullopt};
    case Op::Neg: {
      Term t = as_term(e.args()[0]);
      t.coef = -t.coef;
      return t;
    }
    case Op::Mul: {
      auto args = e.args();
      if (args[0].is_constant()) {
        std::vector<Expr> rest(args.begin() + 1, args.end());
        return {args[0].number(), Expr::mul(std::move(rest))};
      }
      return {1.0, e};
    }
    default:
      return {1.0, e};
  }
}

Expr term_expr(double coef, const Expr& monomial) {
  if (coef == 1.0) return monomial;
  if (coef == -1.0) return Expr::neg(monomial);
  std::vector<Expr> f{Expr::constant(coef)};
  auto rest = factors_of(monomial);
  f.insert(f.end(), rest.begin(), rest.end());
  return Expr::mul(std::move(f));
}

Expr simplify_node(const Expr& e);

Expr simplify_sum(const std::vector<std::pair<double, Expr>>& signed_parts) {
  std::vector<Term> terms;
  std::map<std::string, std::size_t> index;
  std::optional<std::size_t> const_slot;

  auto add_term = [&](Term t) {
    if (!t.monomial) {
      if (!const_slot) {
        const_slot = terms.size();
        terms.push_back({0.0, std::nullopt});
      }
      terms[*const_slot].coef += t.coef;
      return;
    }
    auto key = monomial_key(*t.monomial);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(std::move(key), terms.size());
      terms.push_back(std::move(t));
    } else {
      terms[it->second].coef += t.coef;
    }
  };
  // Operands are already simplified, so any Add/Sub here is sum structure.
  auto collect = [&](auto& self, double sign, const Expr& e) -> void {
    if (e.op() == Op::Add) {
      for (const auto& a : e.args()) self(self, sign, a);
    } else if (e.op() == Op::Sub) {
      self(self, sign, e.args()[0]);
      self(self, -sign, e.args()[1]);
    } else {
      Term t = as_term(e);
      t.coef *= sign;
      add_term(std::move(t));
    }
  };
  for (const auto& [sign, part] : signed_parts) collect(collect, sign, simplify_node(part));

  std::optional<Expr> acc;
  std::vector<Expr> pending;  // positive terms awaiting an n-ary Add
  auto flush = [&] {
    if (pending.empty()) return;
    if (acc) pending.insert(pending.begin(), *acc);
    acc = Expr::add(std::exchange(pending, {}));
  };
  auto build = [](double coef, const std::optional<Expr>& m) {
    return m ? term_expr(coef, *m) : Expr::constant(coef);
  };
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    if (!acc && pending.empty()) {
      acc = build(t.coef, t.monomial);
    } else if (t.coef < 0.0) {
      flush();
      acc = Expr::sub(*acc, build(-t.coef, t.monomial));
    } else {
      pending.push_back(build(t.coef, t.monomial));
    }
  }
  flush();
  return acc ? *acc : Expr::constant(0.0);
}

// Collects powers of equal bases; the factors must already be simplified.
Expr combine_factors(std::span<const Expr> factors_in) {
  double coef = 1.0;
  std::vector<Expr> bases;
  std::vector<double> exponents;
  std::map<std::string, std::size_t> index;

  auto absorb = [&](auto& self, const Expr& f) -> void {
    switch (f.op()) {
      case Op::Constant:
        coef *= f.number();
        return;
      case Op::Neg:
        coef = -coef;
        self(self, f.args()[0]);
        return;
      case Op::Mul:
        for (const auto& a : f.args()) self(self, a);
        return;
      default:
        break;
    }
    Expr base = f;
    double exponent = 1.0;
    if (f.op() == Op::Pow) {
      base = f.args()[0];
      exponent = f.number();
    }
    auto key = base.str();
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, bases.size());
      bases.push_back(base);
      exponents.push_back(exponent);
    } else {
      exponents[it->second] += exponent;
    }
  };
  for (const auto& f : factors_in) absorb(absorb, f);

  if (coef == 0.0) return Expr::constant(0.0);
  std::vector<Expr> factors;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (exponents[i] == 0.0) continue;
    factors.push_back(exponents[i] == 1.0 ? bases[i] : Expr::pow(bases[i], exponents[i]));
  }
  if (factors.empty()) return Expr::constant(coef);
  return term_expr(coef, Expr::mul(std::move(factors)));
}

Expr simplify_product(std::span<const Expr> raw) {
  std::vector<Expr> done;
  for (const auto& f : raw) done.push_back(simplify_node(f));
  return combine_factors(done);
}

Expr simplify_node(const Expr& e) {
  auto args = e.args();
  switch (e.op()) {
    case Op::Constant:
    case Op::Symbol:
      return e;
    case Op::Add: {
      std::vector<std::pair<double, Expr>> parts;
      for (const auto& a : args) parts.emplace_back(1.0, a);
      return simplify_sum(parts);
    }
    case Op::Sub:
      return simplify_sum({{1.0, args[0]}, {-1.0, args[1]}});
    case Op::Neg: {
      Expr inner = simplify_node(args[0]);
      if (inner.is_constant()) return Expr::constant(-inner.number());
      return simplify_sum({{-1.0, inner}});
    }
    case Op::Mul:
      return simplify_product(args);
    case Op::Div: {
      Expr num = simplify_node(args[0]);
      Expr den = simplify_node(args[1]);
      if (den.is_constant(1.0)) return num;
      if (num.is_constant(0.0) && !(den.is_constant(0.0))) return Expr::constant(0.0);
      if (num.is_constant() && den.is_constant() && den.number() != 0.0)
        return Expr::constant(num.number() / den.number());
      if (den.is_constant(-1.0)) return simplify_sum({{-1.0, num}});
      return Expr::div(num, den);
    }
    case Op::Pow: {
      Expr base = simplify_node(args[0]);
      double k = e.number();
      if (k == 1.0) return base;
      if (k == 0.0) return Expr::constant(1.0);
      if (base.is_constant()) {
        double b = base.number();
        bool defined = !(b == 0.0 && k < 0.0) && !(b < 0.0 && k != std::floor(k));
        if (defined) return Expr::constant(std::pow(b, k));
        return Expr::pow(base, k);
      }
      if (base.op() == Op::Pow && k == std::floor(k)) return simplify_node(Expr::pow(base.args()[0], base.number() * k));
      return combine_factors(std::vector<Expr>{Expr::pow(base, k)});
    }
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) { return simplify_node(e); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

Expr diff_raw(const Expr& e, std::string_view wrt, const Aggregates& agg) {
  if (!depends_on(e, wrt, agg)) return Expr::constant(0.0);
  auto args = e.args();
  switch (e.op()) {
    case Op::Constant:
      return Expr::constant(0.0);
    case Op::Symbol:
      return Expr::constant(1.0);  // the symbol itself, or an aggregate containing it
    case Op::Add: {
      std::vector<Expr> terms;
      for (const auto& a : args)
        if (depends_on(a, wrt, agg)) terms.push_back(diff_raw(a, wrt, agg));
      return Expr::add(std::move(terms));
    }
    case Op::Sub:
      return Expr::sub(diff_raw(args[0], wrt, agg), diff_raw(args[1], wrt, agg));
    case Op::Neg:
      return Expr::neg(diff_raw(args[0], wrt, agg));
    case Op::Mul: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!depends_on(args[i], wrt, agg)) continue;
        std::vector<Expr> f;
        for (std::size_t j = 0; j < args.size(); ++j) f.push_back(i == j ? diff_raw(args[j], wrt, agg) : args[j]);
        terms.push_back(Expr::mul(std::move(f)));
      }
      return Expr::add(std::move(terms));
    }
    case Op::Div: {
      const Expr& u = args[0];
      const Expr& v = args[1];
      Expr du = diff_raw(u, wrt, agg);
      Expr dv = diff_raw(v, wrt, agg);
      return Expr::div(Expr::sub(Expr::mul({du, v}), Expr::mul({u, dv})), Expr::pow(v, 2.0));
    }
    case Op::Pow: {
      double k = e.number();
      return Expr::mul({Expr::constant(k), Expr::pow(args[0], k - 1.0), diff_raw(args[0], wrt, agg)});
    }
  }
  return Expr::constant(0.0);
}

}  // namespace

Expr diff(const Expr& e, std::string_view wrt, const Aggregates& aggregates) {
  return simplify(diff_raw(e, wrt, aggregates));
}

// ---------------------------------------------------------------------------
// Compiled evaluation

Program::Program(const Expr& e, std::span<const std::string> slots) {
  emit(e, slots);
  std::size_t depth = 0;
  for (const auto& ins : code_) {
    switch (ins.code) {
      case Code::Const:
      case Code::Load:
        ++depth;
        break;
      case Code::Add:
      case Code::Mul:
        depth -= ins.arity - 1;
        break;
      case Code::Sub:
      case Code::Div:
        --depth;
        break;
      default:
        break;
    }
    depth_ = std::max(depth_, depth);
  }
}

void Program::emit(const Expr& e, std::span<const std::string> slots) {
  auto args = e.args();
  switch (e.op()) {
    case Op::Constant:
      code_.push_back({Code::Const, 0, e.number(), 0});
      return;
    case Op::Symbol: {
      auto it = std::find(slots.begin(), slots.end(), e.name());
      if (it == slots.end()) throw UnboundSymbol(e.name());
      code_.push_back({Code::Load, 0, 0.0, static_cast<std::size_t>(it - slots.begin())});
      return;
    }
    default:
      break;
  }
  for (const auto& a : args) emit(a, slots);
  auto arity = static_cast<unsigned>(args.size());
  switch (e.op()) {
    case Op::Add:
      code_.push_back({Code::Add, arity, 0.0, 0});
      break;
    case Op::Sub:
      code_.push_back({Code::Sub, 2, 0.0, 0});
      break;
    case Op::Mul:
      code_.push_back({Code::Mul, arity, 0.0, 0});
      break;
    case Op::Div:
      code_.push_back({Code::Div, 2, 0.0, 0});
      break;
    case Op::Pow:
      code_.push_back({Code::Pow, 1, e.number(), 0});
      break;
    case Op::Neg:
      code_.push_back({Code::Neg, 1, 0.0, 0});
      break;
    default:
      break;
  }
}

double Program::operator()(std::span<const double> values) const {
  if (code_.empty()) return 0.0;
  thread_local std::vector<double> stack;
  stack.resize(std::max<std::size_t>(depth_, 1));
  std::size_t top = 0;
  for (const auto& ins : code_) {
    switch (ins.code) {
      case Code::Const:
        stack[top++] = ins.number;
        break;
      case Code::Load:
        stack[top++] = values[ins.slot];
        break;
      case Code::Add: {
        double s = 0.0;
        for (std::size_t i = top - ins.arity; i < top; ++i) s += stack[i];
        top -= ins.arity;
        stack[top++] = s;
        break;
      }
      case Code::Mul: {
        double p = 1.0;
        for (std::size_t i = top - ins.arity; i < top; ++i) p *= stack[i];
        top -= ins.arity;
        stack[top++] = p;
        break;
      }
      case Code::Sub:
        --top;
        stack[top - 1] -= stack[top];
        break;
      case Code::Div:
        --top;
        stack[top - 1] = checked_div(stack[top - 1], stack[top]);
        break;
      case Code::Pow:
        stack[top - 1] = checked_pow(stack[top - 1], ins.number);
        break;
      case Code::Neg:
        stack[top - 1] = -stack[top - 1];
        break;
    }
  }
  return stack[0];
}

}  // namespace ngmpn
