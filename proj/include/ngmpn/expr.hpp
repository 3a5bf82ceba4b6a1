#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ngmpn/error.hpp"

namespace ngmpn {

enum class Op { Constant, Symbol, Add, Sub, Mul, Div, Pow, Neg };

/// Immutable symbolic expression over named symbols.
///
/// Nodes are shared, so copying an Expr is cheap. Add and Mul are n-ary and
/// flatten nested nodes of the same kind on construction; Pow carries a
/// constant real exponent.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(double value);
  static Expr symbol(std::string name);
  static Expr add(std::vector<Expr> terms);
  static Expr mul(std::vector<Expr> factors);
  static Expr sub(Expr lhs, Expr rhs);
  static Expr div(Expr num, Expr den);
  static Expr pow(Expr base, double exponent);
  static Expr neg(Expr operand);

  Op op() const noexcept;
  /// Constant value, or the exponent of a Pow node.
  double number() const noexcept;
  const std::string& name() const noexcept;
  std::span<const Expr> args() const noexcept;

  bool is_constant() const noexcept { return op() == Op::Constant; }
  bool is_constant(double v) const noexcept { return is_constant() && number() == v; }

  /// Canonical printed form; parse(e.str()) reproduces e.
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b) { return sub(a, b); }
  friend Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
  friend Expr operator/(const Expr& a, const Expr& b) { return div(a, b); }
  friend Expr operator-(const Expr& a) { return neg(a); }

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

/// Symbol name -> value. Looking up a missing name throws UnboundSymbol.
class Bindings {
 public:
  Bindings() = default;
  Bindings(std::initializer_list<std::pair<const std::string, double>> init) : values_(init) {}

  void set(std::string name, double value) { values_[std::move(name)] = value; }
  double get(std::string_view name) const;
  bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
  const std::map<std::string, double, std::less<>>& values() const noexcept { return values_; }

 private:
  std::map<std::string, double, std::less<>> values_;
};

/// Symbols that stand for the sum of other symbols, e.g. N -> {S, I, R}.
/// Differentiation applies the chain rule through them.
using Aggregates = std::map<std::string, std::set<std::string>, std::less<>>;

Expr parse_expr(std::string_view text);
double eval(const Expr& e, const Bindings& b);
Expr diff(const Expr& e, std::string_view wrt, const Aggregates& aggregates = {});
Expr simplify(const Expr& e);
std::set<std::string> free_symbols(const Expr& e);
bool depends_on(const Expr& e, std::string_view symbol, const Aggregates& aggregates = {});

/// An expression flattened to a postfix program over numbered slots, for
/// evaluation in simulation inner loops.
class Program {
 public:
  Program() = default;
  /// `slots` lists the symbol bound to each slot index; an expression symbol
  /// missing from it throws UnboundSymbol.
  Program(const Expr& e, std::span<const std::string> slots);

  double operator()(std::span<const double> values) const;

 private:
  enum class Code : unsigned char { Const, Load, Add, Sub, Mul, Div, Pow, Neg };
  struct Instr {
    Code code;
    unsigned arity;
    double number;
    std::size_t slot;
  };
  void emit(const Expr& e, std::span<const std::string> slots);

  std::vector<Instr> code_;
  std::size_t depth_ = 0;
};

}  // namespace ngmpn
