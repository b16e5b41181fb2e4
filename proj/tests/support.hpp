#pragma once

// Conversions between library tensors and the oracle's plain matrices.

#include <vector>

#include "inpaint/tensor.hpp"
#include "oracle.hpp"

namespace support {

inline std::vector<double> values(const inpaint::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline oracle::Mat to_mat(const inpaint::Tensor& t) { return {t.rows(), t.cols(), values(t)}; }

inline inpaint::Tensor to_tensor(const oracle::Mat& m) { return inpaint::Tensor({m.r, m.c}, m.v); }

}  // namespace support
