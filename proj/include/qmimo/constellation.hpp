#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qmimo/common.hpp"

namespace qmimo {

// Gray-labeled square QAM normalized to mean symbol energy Es.  The label of
// point index k is its bit pattern: the high bits_per_axis bits Gray-code the
// real axis, the low ones the imaginary axis.  Bit b of a label is extracted
// MSB-first (b = 0 is the most significant bit).
struct Constellation {
  std::vector<cplx> points;
  std::vector<unsigned> labels;  // Gray label per point index
  int bits_per_symbol = 0;
  double es = 1.0;

  static Constellation qam(int size, double es = 1.0);

  int size() const { return static_cast<int>(points.size()); }
  int bit(int point_index, int b) const {
    return (labels[point_index] >> (bits_per_symbol - 1 - b)) & 1u;
  }
  // Point index whose Gray label equals `label`.
  int index_of_label(unsigned label) const;
};

// Nearest constellation point per entry; ties break toward the smaller index.
int slice_hard(cplx s, const Constellation& c);
Eigen::MatrixXi slice_hard(const Eigen::MatrixXcd& s, const Constellation& c);

}  // namespace qmimo
