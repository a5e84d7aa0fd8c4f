#pragma once

// Exact arithmetic on finite-support probability mass functions over Z^d.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnstein/detail/parallel.hpp"

namespace dnstein {

using Coord = std::int64_t;

struct LatticePoint {
  std::vector<Coord> c;

  LatticePoint() = default;
  explicit LatticePoint(std::vector<Coord> v) : c(std::move(v)) {}
  LatticePoint(std::initializer_list<Coord> v) : c(v) {}

  static LatticePoint zero(int dim) { return LatticePoint(std::vector<Coord>(dim, 0)); }
  static LatticePoint unit(int dim, int axis) {
    LatticePoint p = zero(dim);
    p.c[axis] = 1;
    return p;
  }

  int dim() const { return static_cast<int>(c.size()); }
  Coord operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  Coord& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;

  LatticePoint operator+(const LatticePoint& o) const {
    LatticePoint r(*this);
    for (int i = 0; i < dim(); ++i) r.c[i] += o.c[i];
    return r;
  }
  LatticePoint operator-(const LatticePoint& o) const {
    LatticePoint r(*this);
    for (int i = 0; i < dim(); ++i) r.c[i] -= o.c[i];
    return r;
  }
  LatticePoint operator-() const {
    LatticePoint r(*this);
    for (auto& x : r.c) x = -x;
    return r;
  }
};

inline Eigen::VectorXd to_vector(const LatticePoint& p) {
  Eigen::VectorXd v(p.dim());
  for (int i = 0; i < p.dim(); ++i) v[i] = static_cast<double>(p[i]);
  return v;
}

inline std::string to_string(const LatticePoint& p) {
  std::string s = "(";
  for (int i = 0; i < p.dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(p[i]);
  }
  return s + ")";
}

// Finite-support pmf on Z^d. Immutable after construction; `tolerance`
// records how far the total mass may sit from 1 (exact constructions keep
// the default, truncations carry their discarded mass).
class LatticePmf {
 public:
  using Support = std::map<LatticePoint, double>;

  LatticePmf(int dim, Support support, double tolerance = 1e-12)
      : dim_(dim), support_(std::move(support)), tolerance_(tolerance) {
    if (dim_ < 1) throw std::invalid_argument("LatticePmf: dimension must be >= 1");
    double total = 0.0;
    for (auto it = support_.begin(); it != support_.end();) {
      if (it->first.dim() != dim_)
        throw std::invalid_argument("LatticePmf: point dimension mismatch");
      if (it->second < 0.0)
        throw std::invalid_argument("LatticePmf: negative probability");
      if (it->second == 0.0) {
        it = support_.erase(it);
        continue;
      }
      total += it->second;
      ++it;
    }
    mass_ = total;
    if (std::abs(total - 1.0) > tolerance_ + 1e-12)
      throw std::invalid_argument("LatticePmf: mass " + std::to_string(total) +
                                  " outside recorded tolerance");
  }

  static LatticePmf delta(const LatticePoint& at) {
    Support s;
    s[at] = 1.0;
    return LatticePmf(at.dim(), std::move(s));
  }

  static LatticePmf uniform(const std::vector<LatticePoint>& pts) {
    if (pts.empty()) throw std::invalid_argument("uniform: empty point list");
    Support s;
    double w = 1.0 / static_cast<double>(pts.size());
    for (const auto& p : pts) s[p] += w;
    return LatticePmf(pts.front().dim(), std::move(s));
  }

  // 1-d helper: pmf on {lo, lo+1, ..., hi} with the given weights.
  static LatticePmf line(Coord lo, const std::vector<double>& w) {
    Support s;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] != 0.0) s[LatticePoint{lo + static_cast<Coord>(i)}] = w[i];
    return LatticePmf(1, std::move(s));
  }

  int dim() const { return dim_; }
  const Support& support() const { return support_; }
  double tolerance() const { return tolerance_; }
  double mass() const { return mass_; }

  double at(const LatticePoint& p) const {
    auto it = support_.find(p);
    return it == support_.end() ? 0.0 : it->second;
  }

 private:
  int dim_;
  Support support_;
  double tolerance_;
  double mass_ = 0.0;
};

namespace detail {

struct Box {
  std::vector<Coord> lo, hi;  // inclusive

  int dim() const { return static_cast<int>(lo.size()); }

  std::size_t cells() const {
    std::size_t n = 1;
    for (int i = 0; i < dim(); ++i) {
      std::size_t e = static_cast<std::size_t>(hi[i] - lo[i] + 1);
      if (e == 0 || n > (std::size_t(1) << 62) / e) return std::size_t(-1);
      n *= e;
    }
    return n;
  }

  std::size_t index(const LatticePoint& p) const {
    std::size_t idx = 0;
    for (int i = 0; i < dim(); ++i)
      idx = idx * static_cast<std::size_t>(hi[i] - lo[i] + 1) +
            static_cast<std::size_t>(p[i] - lo[i]);
    return idx;
  }

  LatticePoint point(std::size_t idx) const {
    LatticePoint p = LatticePoint::zero(dim());
    for (int i = dim() - 1; i >= 0; --i) {
      std::size_t e = static_cast<std::size_t>(hi[i] - lo[i] + 1);
      p[i] = lo[i] + static_cast<Coord>(idx % e);
      idx /= e;
    }
    return p;
  }
};

inline Box bounding_box(const LatticePmf::Support& s, int dim) {
  Box b;
  b.lo.assign(dim, 0);
  b.hi.assign(dim, 0);
  bool first = true;
  for (const auto& [p, w] : s) {
    (void)w;
    for (int i = 0; i < dim; ++i) {
      if (first || p[i] < b.lo[i]) b.lo[i] = p[i];
      if (first || p[i] > b.hi[i]) b.hi[i] = p[i];
    }
    first = false;
  }
  return b;
}

constexpr std::size_t kDenseConvCells = std::size_t(1) << 22;
constexpr double kConvPrune = 1e-15;

}  // namespace detail

// Exact distribution of the independent sum. Entries below 1e-15 are pruned
// and the pruned mass is accumulated into the result's tolerance.
inline LatticePmf convolve(const LatticePmf& p, const LatticePmf& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("convolve: dimension mismatch");
  const int d = p.dim();
  detail::Box bp = detail::bounding_box(p.support(), d);
  detail::Box bq = detail::bounding_box(q.support(), d);
  detail::Box out;
  out.lo.resize(d);
  out.hi.resize(d);
  for (int i = 0; i < d; ++i) {
    out.lo[i] = bp.lo[i] + bq.lo[i];
    out.hi[i] = bp.hi[i] + bq.hi[i];
  }

  LatticePmf::Support acc;
  double pruned = 0.0;

  if (out.cells() <= detail::kDenseConvCells) {
    const std::size_t qcells = bq.cells();
    std::vector<double> qdense(qcells, 0.0);
    for (const auto& [y, w] : q.support()) qdense[bq.index(y)] = w;

    // Row strides of the output box; the last axis is contiguous in both
    // boxes, so one q-row maps onto a contiguous slice of the output.
    std::vector<std::size_t> ostride(d);
    ostride[d - 1] = 1;
    for (int i = d - 2; i >= 0; --i)
      ostride[i] = ostride[i + 1] * static_cast<std::size_t>(out.hi[i + 1] - out.lo[i + 1] + 1);

    const Coord qrow = bq.hi[d - 1] - bq.lo[d - 1] + 1;
    const std::size_t rows = qcells / static_cast<std::size_t>(qrow);
    // out.lo = bp.lo + bq.lo, so out_index(x + qpt) splits into an atom
    // offset relative to bp.lo plus a row base relative to bq.lo
    std::vector<std::size_t> rowbase(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      LatticePoint qpt = bq.point(r * static_cast<std::size_t>(qrow));
      std::size_t idx = 0;
      for (int i = 0; i < d; ++i)
        idx += ostride[i] * static_cast<std::size_t>(qpt[i] - bq.lo[i]);
      rowbase[r] = idx;
    }

    // Fixed 4-way split of p's atoms; each chunk scatters into its own
    // buffer and the buffers are merged in chunk order, so the result is
    // bit-identical for every thread count.
    std::vector<std::pair<std::size_t, double>> atoms;  // (output offset, weight)
    atoms.reserve(p.support().size());
    for (const auto& [x, w] : p.support()) {
      std::size_t off = 0;
      for (int i = 0; i < d; ++i) off += ostride[i] * static_cast<std::size_t>(x[i] - bp.lo[i]);
      atoms.emplace_back(off, w);
    }

    const std::size_t ocells = out.cells();
    const int nchunks = atoms.size() >= 1024 ? 4 : 1;
    std::vector<std::vector<double>> parts(nchunks);
    detail::run_chunks(nchunks, [&](int c) {
      auto [lo, hi] = detail::chunk_range(atoms.size(), nchunks, c);
      auto& buf = parts[c];
      buf.assign(ocells, 0.0);
      for (std::size_t a = lo; a < hi; ++a) {
        const std::size_t off = atoms[a].first;
        const double px = atoms[a].second;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = qdense.data() + r * static_cast<std::size_t>(qrow);
          double* dst = buf.data() + off + rowbase[r];
          for (Coord k = 0; k < qrow; ++k) dst[k] += px * src[k];
        }
      }
    });

    std::vector<double> dense(ocells, 0.0);
    for (int c = 0; c < nchunks; ++c) {
      if (parts[c].empty()) continue;
      for (std::size_t i = 0; i < ocells; ++i) dense[i] += parts[c][i];
    }
    for (std::size_t i = 0; i < ocells; ++i) {
      double v = dense[i];
      if (v == 0.0) continue;
      if (v < detail::kConvPrune) {
        pruned += v;
        continue;
      }
      acc[out.point(i)] = v;
    }
  } else {
    for (const auto& [x, px] : p.support())
      for (const auto& [y, qy] : q.support()) acc[x + y] += px * qy;
    for (auto it = acc.begin(); it != acc.end();) {
      if (it->second < detail::kConvPrune) {
        pruned += it->second;
        it = acc.erase(it);
      } else {
        ++it;
      }
    }
  }

  double tol = p.tolerance() + q.tolerance() + pruned + 1e-15;
  return LatticePmf(d, std::move(acc), tol);
}

// m-fold self-convolution by binary powering.
inline LatticePmf convolve_power(const LatticePmf& p, int m) {
  if (m < 1) throw std::invalid_argument("convolve_power: m must be >= 1");
  LatticePmf base = p;
  LatticePmf res = LatticePmf::delta(LatticePoint::zero(p.dim()));
  bool have = false;
  int k = m;
  while (k > 0) {
    if (k & 1) {
      res = have ? convolve(res, base) : base;
      have = true;
    }
    k >>= 1;
    if (k > 0) base = convolve(base, base);
  }
  return res;
}

inline LatticePmf translate(const LatticePmf& p, const LatticePoint& v) {
  if (p.dim() != v.dim()) throw std::invalid_argument("translate: dimension mismatch");
  LatticePmf::Support s;
  for (const auto& [x, w] : p.support()) s[x + v] = w;
  return LatticePmf(p.dim(), std::move(s), p.tolerance());
}

// Half-l1 distance over the union support.
inline double tv_distance(const LatticePmf& p, const LatticePmf& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("tv_distance: dimension mismatch");
  double sum = 0.0;
  auto ip = p.support().begin(), ep = p.support().end();
  auto iq = q.support().begin(), eq = q.support().end();
  while (ip != ep || iq != eq) {
    if (iq == eq || (ip != ep && ip->first < iq->first)) {
      sum += ip->second;
      ++ip;
    } else if (ip == ep || iq->first < ip->first) {
      sum += iq->second;
      ++iq;
    } else {
      sum += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return std::min(0.5 * sum, 1.0);
}

// Keeps the listed axes (in the given order) and sums out the rest.
inline LatticePmf marginal(const LatticePmf& p, const std::vector<int>& axes) {
  LatticePmf::Support s;
  for (const auto& [x, w] : p.support()) {
    LatticePoint y = LatticePoint::zero(static_cast<int>(axes.size()));
    for (std::size_t i = 0; i < axes.size(); ++i) y[static_cast<int>(i)] = x[axes[i]];
    s[y] += w;
  }
  return LatticePmf(static_cast<int>(axes.size()), std::move(s), p.tolerance());
}

struct MomentTable {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<double> abs_central;     // E |x - center|^l, l = 0..max_order
  std::vector<double> metric_central;  // E ||x - center||_Sigma^l (empty without metric)
};

// Exact moments by summation. `metric`, when given, must be SPD; the metric
// norm is ||v||_Sigma = sqrt(v' Sigma^{-1} v).
inline MomentTable moments(const LatticePmf& p, const Eigen::VectorXd& center,
                           const Eigen::MatrixXd* metric, int max_order) {
  const int d = p.dim();
  if (center.size() != d) throw std::invalid_argument("moments: center dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (metric) {
    if (metric->rows() != d || metric->cols() != d)
      throw std::invalid_argument("moments: metric dimension mismatch");
    llt.compute(*metric);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("moments: metric is not positive definite");
  }

  MomentTable t;
  t.mean = Eigen::VectorXd::Zero(d);
  t.cov = Eigen::MatrixXd::Zero(d, d);
  t.abs_central.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
  if (metric) t.metric_central.assign(static_cast<std::size_t>(max_order) + 1, 0.0);

  double total = 0.0;
  for (const auto& [x, w] : p.support()) {
    Eigen::VectorXd v = to_vector(x);
    t.mean += w * v;
    total += w;
    Eigen::VectorXd u = v - center;
    double r = u.norm();
    double pw = w;
    for (int l = 0; l <= max_order; ++l) {
      t.abs_central[static_cast<std::size_t>(l)] += pw;
      pw *= r;
    }
    if (metric) {
      // ||u||_Sigma^2 = ||L^{-1} u||^2 for Sigma = L L'
      double rs = llt.matrixL().solve(u).norm();
      double pws = w;
      for (int l = 0; l <= max_order; ++l) {
        t.metric_central[static_cast<std::size_t>(l)] += pws;
        pws *= rs;
      }
    }
  }
  if (total > 0.0) t.mean /= total;
  for (const auto& [x, w] : p.support()) {
    Eigen::VectorXd u = to_vector(x) - t.mean;
    t.cov += (w / total) * u * u.transpose();
  }
  return t;
}

// Serialization: first line is a JSON header {"dim":d,"tolerance":t},
// followed by one record per support point, `i1,...,id,prob`.
inline void write_pmf_csv(const LatticePmf& p, std::ostream& os) {
  os.precision(17);
  os << "{\"dim\": " << p.dim() << ", \"tolerance\": " << p.tolerance() << "}\n";
  for (const auto& [x, w] : p.support()) {
    for (int i = 0; i < p.dim(); ++i) os << x[i] << ",";
    os << w << "\n";
  }
}

inline LatticePmf read_pmf_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("pmf read: empty stream");
  auto grab = [&](const std::string& key) {
    auto pos = header.find("\"" + key + "\"");
    if (pos == std::string::npos) throw std::runtime_error("pmf read: missing " + key);
    pos = header.find(':', pos);
    return std::stod(header.substr(pos + 1));
  };
  int dim = static_cast<int>(grab("dim"));
  double tol = grab("tolerance");

  LatticePmf::Support s;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    LatticePoint p = LatticePoint::zero(dim);
    std::string tok;
    for (int i = 0; i < dim; ++i) {
      if (!std::getline(ss, tok, ',')) throw std::runtime_error("pmf read: short record");
      p[i] = std::stoll(tok);
    }
    if (!std::getline(ss, tok, ',')) throw std::runtime_error("pmf read: missing probability");
    s[p] += std::stod(tok);
  }
  return LatticePmf(dim, std::move(s), tol);
}

}  // namespace dnstein
