// Copyright 2026 The Sitpose Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batched LSTM building blocks with explicit backpropagation through time.
//
// Sequences are stored time-major in a single matrix: column t * B + b holds
// timestep t of batch item b. Gate rows are ordered input, forget, cell,
// output.

#ifndef SITPOSE_LSTM_HPP_
#define SITPOSE_LSTM_HPP_

#include <Eigen/Core>

#include "sitpose/error.hpp"

namespace sitpose::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using ConstMap = Eigen::Map<const Mat<T>>;
template <class T>
using MutMap = Eigen::Map<Mat<T>>;

template <class T>
struct LstmParams {
  ConstMap<T> wx;  // 4H x in
  ConstMap<T> wh;  // 4H x H
  ConstMap<T> b;   // 4H x 1
};

template <class T>
struct LstmGrads {
  MutMap<T> wx;
  MutMap<T> wh;
  MutMap<T> b;
};

template <class T>
struct LstmCache {
  Mat<T> gates;   // activated gates, 4H x TB
  Mat<T> cell;    // H x TB
  Mat<T> cell_tanh;
  Mat<T> hidden;  // H x TB
};

// Runs one direction over `x` (in x T*B). `reverse` processes t = T-1..0.
template <class T>
void LstmForward(const LstmParams<T>& p, const Mat<T>& x, int steps, int batch, bool reverse,
                 LstmCache<T>& cache) {
  const Eigen::Index h = p.wh.cols();
  if (p.wx.rows() != 4 * h || p.wh.rows() != 4 * h || p.b.rows() != 4 * h || p.wx.cols() != x.rows() ||
      x.cols() != static_cast<Eigen::Index>(steps) * batch) {
    throw Error(ErrorKind::kShapeMismatch, "LSTM input does not match parameter shapes");
  }
  const Eigen::Index tb = x.cols();
  cache.gates.noalias() = p.wx * x;
  cache.gates.colwise() += p.b.col(0);
  cache.cell.resize(h, tb);
  cache.cell_tanh.resize(h, tb);
  cache.hidden.resize(h, tb);
  Mat<T> pre(4 * h, batch);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    auto g = cache.gates.middleCols(col, batch);
    if (s > 0) {
      const int tp = reverse ? t + 1 : t - 1;
      g.noalias() += p.wh * cache.hidden.middleCols(static_cast<Eigen::Index>(tp) * batch, batch);
    }
    g.topRows(2 * h) = g.topRows(2 * h).array().logistic();
    g.middleRows(2 * h, h) = g.middleRows(2 * h, h).array().tanh();
    g.bottomRows(h) = g.bottomRows(h).array().logistic();
    auto c = cache.cell.middleCols(col, batch);
    c = g.topRows(h).cwiseProduct(g.middleRows(2 * h, h));
    if (s > 0) {
      const int tp = reverse ? t + 1 : t - 1;
      c += g.middleRows(h, h).cwiseProduct(cache.cell.middleCols(static_cast<Eigen::Index>(tp) * batch, batch));
    }
    cache.cell_tanh.middleCols(col, batch) = c.array().tanh();
    cache.hidden.middleCols(col, batch) = g.bottomRows(h).cwiseProduct(cache.cell_tanh.middleCols(col, batch));
  }
}

// Accumulates parameter gradients into `grads` and writes d(loss)/d(x).
template <class T>
void LstmBackward(const LstmParams<T>& p, const Mat<T>& x, const LstmCache<T>& cache, const Mat<T>& dh,
                  int steps, int batch, bool reverse, LstmGrads<T>& grads, Mat<T>& dx) {
  const Eigen::Index h = p.wh.cols();
  const Eigen::Index tb = x.cols();
  Mat<T> dpre(4 * h, tb);
  Mat<T> h_prev = Mat<T>::Zero(h, tb);
  Mat<T> dh_next = Mat<T>::Zero(h, batch);
  Mat<T> dc_next = Mat<T>::Zero(h, batch);
  Mat<T> dc(h, batch);
  for (int s = steps - 1; s >= 0; --s) {
    const int t = reverse ? steps - 1 - s : s;
    const int tp = reverse ? t + 1 : t - 1;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    const auto g = cache.gates.middleCols(col, batch);
    const auto gi = g.topRows(h).array();
    const auto gf = g.middleRows(h, h).array();
    const auto gg = g.middleRows(2 * h, h).array();
    const auto go = g.bottomRows(h).array();
    const auto tc = cache.cell_tanh.middleCols(col, batch).array();

    const Mat<T> dht = dh.middleCols(col, batch) + dh_next;
    auto d = dpre.middleCols(col, batch);
    d.bottomRows(h) = (dht.array() * tc * go * (T(1) - go)).matrix();
    dc = (dht.array() * go * (T(1) - tc * tc)).matrix() + dc_next;
    d.topRows(h) = (dc.array() * gg * gi * (T(1) - gi)).matrix();
    d.middleRows(2 * h, h) = (dc.array() * gi * (T(1) - gg * gg)).matrix();
    if (s > 0) {
      const Eigen::Index pcol = static_cast<Eigen::Index>(tp) * batch;
      d.middleRows(h, h) = (dc.array() * cache.cell.middleCols(pcol, batch).array() * gf * (T(1) - gf)).matrix();
      h_prev.middleCols(col, batch) = cache.hidden.middleCols(pcol, batch);
    } else {
      d.middleRows(h, h).setZero();
    }
    dc_next = (dc.array() * gf).matrix();
    dh_next.noalias() = p.wh.transpose() * d;
  }
  grads.wh.noalias() += dpre * h_prev.transpose();
  grads.wx.noalias() += dpre * x.transpose();
  grads.b.col(0) += dpre.rowwise().sum();
  dx.noalias() = p.wx.transpose() * dpre;
}

}  // namespace sitpose::nn

#endif  // SITPOSE_LSTM_HPP_
