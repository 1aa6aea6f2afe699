#include "kdvchart/jet_expr.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>

namespace kdvchart {

JetOrderOverflow::JetOrderOverflow(const std::string& field, int order)
    : std::runtime_error("jet order overflow: " + field + " of order " + std::to_string(order) + " exceeds " +
                         std::to_string(kMaxJetOrder)),
      field_(field),
      order_(order) {}

// ------------------------------------------------------------- atom table

namespace {

constexpr std::size_t kChunkBits = 12;
constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;
constexpr std::size_t kMaxChunks = 4096;

class AtomTable {
 public:
  static AtomTable& instance() {
    static AtomTable table;
    return table;
  }

  const AtomInfo& get(VarId id) const {
    if (id >= size_.load(std::memory_order_acquire)) throw std::out_of_range("unknown atom id");
    return chunks_[id >> kChunkBits].load(std::memory_order_acquire)[id & (kChunkSize - 1)];
  }

  std::size_t size() const { return size_.load(std::memory_order_acquire); }

  VarId intern(const std::string& key, AtomInfo info) {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    std::size_t id = size_.load(std::memory_order_relaxed);
    std::size_t chunk = id >> kChunkBits;
    if (chunk >= kMaxChunks) throw std::length_error("atom table exhausted");
    AtomInfo* block = chunks_[chunk].load(std::memory_order_relaxed);
    if (block == nullptr) {
      block = new AtomInfo[kChunkSize];
      owned_.emplace_back(block);
      chunks_[chunk].store(block, std::memory_order_release);
    }
    block[id & (kChunkSize - 1)] = std::move(info);
    index_.emplace(key, static_cast<VarId>(id));
    size_.store(id + 1, std::memory_order_release);
    return static_cast<VarId>(id);
  }

 private:
  AtomTable() {
    for (auto& c : chunks_) c.store(nullptr);
  }

  std::array<std::atomic<AtomInfo*>, kMaxChunks> chunks_;
  std::vector<std::unique_ptr<AtomInfo[]>> owned_;
  std::atomic<std::size_t> size_{0};
  std::map<std::string, VarId> index_;
  std::mutex mutex_;
};

std::string pad_order(int k) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", k);
  return buf;
}

}  // namespace

namespace atoms {

VarId jet(const std::string& field, int order) {
  if (order < 0) throw std::invalid_argument("negative jet order");
  if (order > kMaxJetOrder) throw JetOrderOverflow(field, order);
  std::string key = "0:" + field + ":" + pad_order(order);
  AtomInfo info{AtomKind::Jet, field, order, nullptr, 0, key};
  return AtomTable::instance().intern(key, std::move(info));
}

VarId param(const std::string& name) {
  std::string key = "1:" + name;
  AtomInfo info{AtomKind::Param, name, 0, nullptr, 0, key};
  return AtomTable::instance().intern(key, std::move(info));
}

VarId nonlocal(const JetExpr& body) {
  int depth = body.nonlocal_depth() + 1;
  std::string printed = body.str();
  std::string key = "2:" + pad_order(depth) + ":" + printed;
  AtomInfo info{AtomKind::Nonlocal, "", 0, std::make_shared<const JetExpr>(body), depth, key};
  return AtomTable::instance().intern(key, std::move(info));
}

const AtomInfo& info(VarId id) { return AtomTable::instance().get(id); }

std::size_t count() { return AtomTable::instance().size(); }

}  // namespace atoms

// ------------------------------------------------------------ stable order

bool stable_less(const Monomial& a, const Monomial& b) {
  auto keyed = [](const Monomial& m) {
    std::vector<std::pair<const std::string*, int>> out;
    for (const auto& [v, e] : m.factors()) out.emplace_back(&atoms::info(v).sort_key, e);
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return *x.first < *y.first; });
    return out;
  };
  auto ka = keyed(a);
  auto kb = keyed(b);
  // Same convention as Monomial::operator<: smaller keys are more significant.
  std::size_t i = 0;
  for (; i < ka.size() && i < kb.size(); ++i) {
    if (*ka[i].first != *kb[i].first) return *ka[i].first > *kb[i].first;
    if (ka[i].second != kb[i].second) return ka[i].second < kb[i].second;
  }
  return i == ka.size() && i < kb.size();
}

// ---------------------------------------------------------------- JetExpr

JetExpr JetExpr::jet(const std::string& field, int order) { return atom(atoms::jet(field, order)); }

JetExpr JetExpr::param(const std::string& name) { return atom(atoms::param(name)); }

JetExpr JetExpr::atom(VarId id) {
  JetExpr e;
  e.num_ = Poly::variable(id);
  return e;
}

JetExpr JetExpr::nonlocal(const JetExpr& body) {
  if (body.is_zero()) return {};
  return atom(atoms::nonlocal(body));
}

JetExpr JetExpr::fraction(Poly num, Poly den) {
  if (den.is_zero()) throw DivisionByZero();
  JetExpr e;
  if (num.is_zero()) return e;
  if (den.is_constant()) {
    num *= Rational(1 / den.constant_value());
    e.num_ = std::move(num);
    e.den_ = Poly(1);
    return e;
  }
  Poly g = gcd(num, den);
  if (!g.is_constant()) {
    num = num.exact_div(g);
    den = den.exact_div(g);
  }
  // Scale so that the stable-leading term of the denominator is monic.
  const Poly::Term* lead = &den.terms().front();
  for (const auto& t : den.terms())
    if (stable_less(lead->mono, t.mono)) lead = &t;
  Rational s = 1 / lead->coeff;
  num *= s;
  den *= s;
  e.num_ = std::move(num);
  e.den_ = std::move(den);
  return e;
}

Rational JetExpr::constant_value() const {
  if (!is_constant()) throw std::logic_error("expression is not constant: " + str());
  return num_.constant_value() / den_.constant_value();
}

JetExpr JetExpr::operator-() const {
  JetExpr r = *this;
  r.num_ = -r.num_;
  return r;
}

JetExpr& JetExpr::operator+=(const JetExpr& o) {
  if (o.is_zero()) return *this;
  if (is_zero()) return *this = o;
  if (den_ == o.den_) {
    if (den_.is_constant()) {
      num_ += o.num_;
      return *this;
    }
    *this = fraction(num_ + o.num_, den_);
    return *this;
  }
  Poly g = gcd(den_, o.den_);
  Poly a = den_.exact_div(g);
  Poly b = o.den_.exact_div(g);
  *this = fraction(num_ * b + o.num_ * a, den_ * b);
  return *this;
}

JetExpr& JetExpr::operator-=(const JetExpr& o) { return *this += -o; }

JetExpr& JetExpr::operator*=(const JetExpr& o) {
  if (is_zero() || o.is_zero()) return *this = JetExpr();
  if (den_.is_constant() && o.den_.is_constant()) {
    num_ *= o.num_;
    return *this;
  }
  Poly g1 = gcd(num_, o.den_);
  Poly g2 = gcd(o.num_, den_);
  Poly n = num_.exact_div(g1) * o.num_.exact_div(g2);
  Poly d = den_.exact_div(g2) * o.den_.exact_div(g1);
  *this = fraction(std::move(n), std::move(d));
  return *this;
}

JetExpr JetExpr::inverse() const {
  if (is_zero()) throw DivisionByZero();
  return fraction(den_, num_);
}

JetExpr& JetExpr::operator/=(const JetExpr& o) { return *this *= o.inverse(); }

JetExpr JetExpr::pow(int n) const {
  if (n < 0) return inverse().pow(-n);
  if (n == 0) return JetExpr(1);
  JetExpr r;
  r.num_ = num_.pow(static_cast<unsigned>(n));
  r.den_ = den_.pow(static_cast<unsigned>(n));
  // Powers of a coprime pair stay coprime; only rescale.
  return fraction(std::move(r.num_), std::move(r.den_));
}

std::vector<VarId> JetExpr::atoms() const {
  auto a = num_.variables();
  auto b = den_.variables();
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

std::vector<VarId> JetExpr::atoms_deep() const {
  std::vector<VarId> out;
  std::vector<VarId> stack = atoms();
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    if (std::find(out.begin(), out.end(), v) != out.end()) continue;
    out.push_back(v);
    const auto& inf = atoms::info(v);
    if (inf.kind == AtomKind::Nonlocal) {
      auto inner = inf.body->atoms();
      stack.insert(stack.end(), inner.begin(), inner.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> JetExpr::fields() const {
  std::vector<std::string> out;
  for (VarId v : atoms_deep()) {
    const auto& inf = atoms::info(v);
    if (inf.kind == AtomKind::Jet) out.push_back(inf.name);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool JetExpr::has_nonlocal() const {
  for (VarId v : atoms())
    if (atoms::info(v).kind == AtomKind::Nonlocal) return true;
  return false;
}

int JetExpr::nonlocal_depth() const {
  int d = 0;
  for (VarId v : atoms()) d = std::max(d, atoms::info(v).depth);
  return d;
}

int JetExpr::max_order(const std::string& field) const {
  int k = -1;
  for (VarId v : atoms_deep()) {
    const auto& inf = atoms::info(v);
    if (inf.kind == AtomKind::Jet && inf.name == field) k = std::max(k, inf.order);
  }
  return k;
}

// --------------------------------------------------------------- printing

namespace {

std::string atom_text(VarId v) {
  const auto& inf = atoms::info(v);
  switch (inf.kind) {
    case AtomKind::Jet:
      if (inf.order == 0) return inf.name;
      if (inf.order <= 3) return inf.name + "_" + std::string(static_cast<std::size_t>(inf.order), 'x');
      return inf.name + "{" + std::to_string(inf.order) + "}";
    case AtomKind::Param:
      return inf.name;
    case AtomKind::Nonlocal:
      return "Dinv(" + inf.body->str() + ")";
  }
  return "?";
}

std::string monomial_text(const Monomial& m) {
  std::vector<std::pair<const std::string*, std::pair<VarId, int>>> fs;
  for (const auto& f : m.factors()) fs.emplace_back(&atoms::info(f.first).sort_key, f);
  std::sort(fs.begin(), fs.end(), [](const auto& a, const auto& b) { return *a.first < *b.first; });
  std::string out;
  for (const auto& [key, f] : fs) {
    if (!out.empty()) out += "*";
    out += atom_text(f.first);
    if (f.second != 1) out += "^" + std::to_string(f.second);
  }
  return out;
}

}  // namespace

std::string to_string(const Poly& p) {
  if (p.is_zero()) return "0";
  std::vector<const Poly::Term*> ts;
  for (const auto& t : p.terms()) ts.push_back(&t);
  // Highest stable order first.
  std::sort(ts.begin(), ts.end(), [](const auto* a, const auto* b) { return stable_less(b->mono, a->mono); });
  std::string out;
  bool first = true;
  for (const auto* t : ts) {
    Rational c = t->coeff;
    bool neg = c < 0;
    if (neg) c = -c;
    if (first) {
      if (neg) out += "-";
    } else {
      out += neg ? " - " : " + ";
    }
    first = false;
    std::string mono = monomial_text(t->mono);
    if (mono.empty()) {
      out += c.get_str();
    } else if (c == 1) {
      out += mono;
    } else {
      out += c.get_str() + "*" + mono;
    }
  }
  return out;
}

std::string JetExpr::str() const {
  if (den_.is_constant()) return to_string(num_);
  auto wrap = [](const Poly& p) {
    std::string s = to_string(p);
    bool simple = p.size() == 1 && p.terms()[0].coeff == 1 && p.terms()[0].mono.factors().size() == 1;
    return simple ? s : "(" + s + ")";
  };
  return wrap(num_) + "/" + wrap(den_);
}

}  // namespace kdvchart
