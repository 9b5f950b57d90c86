#include "qmimo/constellation.hpp"

#include <cmath>
#include <stdexcept>

namespace qmimo {

namespace {

unsigned binary_to_gray(unsigned b) { return b ^ (b >> 1); }

}  // namespace

Constellation Constellation::qam(int size, double es) {
  int m = 0;
  while ((1 << m) < size) ++m;
  if ((1 << m) != size || m % 2 != 0)
    throw std::invalid_argument("Constellation::qam: size must be 4^k");
  const int per_axis = 1 << (m / 2);

  Constellation c;
  c.bits_per_symbol = m;
  c.es = es;
  // Mean energy of levels {+-1, +-3, ...} per axis is (per_axis^2 - 1)/3.
  double scale = std::sqrt(es * 3.0 / (2.0 * (per_axis * per_axis - 1)));
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      double re = (2 * i - per_axis + 1) * scale;
      double im = (2 * j - per_axis + 1) * scale;
      c.points.push_back({re, im});
      unsigned label = (binary_to_gray(static_cast<unsigned>(i)) << (m / 2)) |
                       binary_to_gray(static_cast<unsigned>(j));
      c.labels.push_back(label);
    }
  }
  return c;
}

int Constellation::index_of_label(unsigned label) const {
  for (int k = 0; k < size(); ++k)
    if (labels[k] == label) return k;
  throw std::invalid_argument("Constellation: unknown label");
}

int slice_hard(cplx s, const Constellation& c) {
  int best = 0;
  double best_d = std::norm(s - c.points[0]);
  for (int k = 1; k < c.size(); ++k) {
    double d = std::norm(s - c.points[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Eigen::MatrixXi slice_hard(const Eigen::MatrixXcd& s, const Constellation& c) {
  Eigen::MatrixXi out(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      out(i, j) = slice_hard(s(i, j), c);
  return out;
}

}  // namespace qmimo
