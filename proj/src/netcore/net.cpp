#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "s2s/netcore.hpp"

namespace s2s {

namespace {

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

OutMap OutMap::chain(std::vector<Mat> mats) {
  if (mats.empty()) throw InvalidInput("deep-linear-chain needs >= 1 matrix");
  OutMap out;
  out.kind = Kind::kDeepLinearChain;
  out.mats = std::move(mats);
  return out;
}

OutMap OutMap::skip(SkipPattern pattern, Mat w3, Mat w4) {
  OutMap out;
  out.kind = Kind::kSkipLinear;
  out.pattern = pattern;
  out.mats = {std::move(w3), std::move(w4)};
  return out;
}

UnitDims unit_dims(const ActivationKind& act, int input_dim, int zeta_dim) {
  if (input_dim < 1) throw ShapeError("input dimension must be positive");
  if (act.is_conv()) {
    if (input_dim % 2 != 0) {
      throw ShapeError("conv input dimension " + std::to_string(input_dim) +
                       " is not divisible by stride 2");
    }
    return {2, input_dim / 2};
  }
  if (act.tag() == ActivationTag::kLinearAttention) {
    const auto& g = act.geometry();
    const int td = g.token_dim();
    if (input_dim != td * g.tokens()) {
      throw ShapeError("attention input must hold (D+1)(N+1) = " +
                       std::to_string(td * g.tokens()) + " entries, got " +
                       std::to_string(input_dim));
    }
    return {2 * g.head_rank * td, td * td};
  }
  if (zeta_dim < 1) throw ShapeError("output dimension must be positive");
  return {input_dim, zeta_dim};
}

UnitLayerNet::UnitLayerNet(ActivationKind act, int input_dim, Mat v, Mat u,
                           OutMap out)
    : act_(act),
      input_dim_(input_dim),
      v_(std::move(v)),
      u_(std::move(u)),
      out_(std::move(out)) {
  validate();
}

UnitLayerNet UnitLayerNet::zeros(const ActivationKind& act, int input_dim,
                                 int zeta_dim, int width, OutMap out) {
  if (width < 0) throw InvalidInput("width must be non-negative");
  const UnitDims d = unit_dims(act, input_dim, zeta_dim);
  return UnitLayerNet(act, input_dim, Mat::Zero(d.nv, width),
                      Mat::Zero(d.nu, width), std::move(out));
}

int UnitLayerNet::output_dim() const {
  if (!act_.is_fc()) return 1;
  switch (out_.kind) {
    case OutMap::Kind::kIdentity:
      return nv();
    case OutMap::Kind::kDeepLinearChain:
      return static_cast<int>(out_.mats.back().rows());
    case OutMap::Kind::kSkipLinear:
      return static_cast<int>(out_.mats[1].rows());
  }
  return nv();
}

void UnitLayerNet::validate() const {
  if (v_.cols() != u_.cols()) {
    throw ShapeError("v and u disagree on width: " + shape_str(v_) + " vs " +
                     shape_str(u_));
  }
  const UnitDims d = unit_dims(act_, input_dim_, static_cast<int>(v_.rows()));
  if (u_.rows() != d.nu || v_.rows() != d.nv) {
    throw ShapeError("unit dims for " + act_.name() + " must be (nu=" +
                     std::to_string(d.nu) + ", nv=" + std::to_string(d.nv) +
                     "), got (" + std::to_string(u_.rows()) + ", " +
                     std::to_string(v_.rows()) + ")");
  }
  if (out_.kind == OutMap::Kind::kIdentity) {
    if (!out_.mats.empty()) throw ShapeError("identity out map has matrices");
    return;
  }
  if (act_.tag() != ActivationTag::kLinearFc) {
    throw Unsupported("deep chains and skip maps require linear-fc units");
  }
  if (out_.kind == OutMap::Kind::kDeepLinearChain) {
    Eigen::Index rows = v_.rows();
    for (const Mat& w : out_.mats) {
      if (w.cols() != rows) {
        throw ShapeError("chain matrix " + shape_str(w) +
                         " does not conform to input width " +
                         std::to_string(rows));
      }
      rows = w.rows();
    }
    return;
  }
  if (out_.mats.size() != 2) throw ShapeError("skip map needs {W3, W4}");
  const Mat& w3 = out_.mats[0];
  const Mat& w4 = out_.mats[1];
  if (w3.cols() != v_.rows() || w4.cols() != w3.rows()) {
    throw ShapeError("skip matrices W3 " + shape_str(w3) + ", W4 " +
                     shape_str(w4) + " do not conform");
  }
  if (out_.pattern == SkipPattern::kSkip1 && v_.rows() != v_.cols()) {
    throw ShapeError("skip1 needs a square second layer (nv == width)");
  }
  if (out_.pattern == SkipPattern::kSkip2 && w3.rows() != v_.cols()) {
    throw ShapeError("skip2 needs W3 rows == width");
  }
}

UnitParams UnitLayerNet::unit(int i) const {
  if (i < 0 || i >= width()) throw InvalidInput("unit index out of range");
  return {v_.col(i), u_.col(i)};
}

void UnitLayerNet::set_unit(int i, const UnitParams& p) {
  if (i < 0 || i >= width()) throw InvalidInput("unit index out of range");
  if (p.v.size() != v_.rows() || p.u.size() != u_.rows()) {
    throw ShapeError("unit parameter sizes do not match the layer");
  }
  v_.col(i) = p.v;
  u_.col(i) = p.u;
}

void UnitLayerNet::append_unit(const UnitParams& p) {
  if (p.v.size() != v_.rows() || p.u.size() != u_.rows()) {
    throw ShapeError("unit parameter sizes do not match the layer");
  }
  v_.conservativeResize(Eigen::NoChange, v_.cols() + 1);
  u_.conservativeResize(Eigen::NoChange, u_.cols() + 1);
  v_.col(v_.cols() - 1) = p.v;
  u_.col(u_.cols() - 1) = p.u;
}

void UnitLayerNet::remove_unit(int i) {
  if (i < 0 || i >= width()) throw InvalidInput("unit index out of range");
  const int h = width();
  Mat v(v_.rows(), h - 1);
  Mat u(u_.rows(), h - 1);
  for (int k = 0, c = 0; k < h; ++k) {
    if (k == i) continue;
    v.col(c) = v_.col(k);
    u.col(c) = u_.col(k);
    ++c;
  }
  v_ = std::move(v);
  u_ = std::move(u);
}

Mat UnitLayerNet::stacked() const {
  Mat s(v_.rows() + u_.rows(), v_.cols());
  s.topRows(v_.rows()) = v_;
  s.bottomRows(u_.rows()) = u_;
  return s;
}

int UnitLayerNet::num_params() const {
  Eigen::Index n = v_.size() + u_.size();
  for (const Mat& w : out_.mats) n += w.size();
  return static_cast<int>(n);
}

Vec UnitLayerNet::flatten() const {
  Vec out(num_params());
  Eigen::Index k = 0;
  for (int i = 0; i < width(); ++i) {
    out.segment(k, v_.rows()) = v_.col(i);
    k += v_.rows();
    out.segment(k, u_.rows()) = u_.col(i);
    k += u_.rows();
  }
  for (const Mat& w : out_.mats) {
    out.segment(k, w.size()) = w.reshaped();
    k += w.size();
  }
  return out;
}

void UnitLayerNet::assign(const Vec& params) {
  if (params.size() != num_params()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, net has " + std::to_string(num_params()));
  }
  Eigen::Index k = 0;
  for (int i = 0; i < width(); ++i) {
    v_.col(i) = params.segment(k, v_.rows());
    k += v_.rows();
    u_.col(i) = params.segment(k, u_.rows());
    k += u_.rows();
  }
  for (Mat& w : out_.mats) {
    w.reshaped() = params.segment(k, w.size());
    k += w.size();
  }
}

Vec Gradient::flatten() const {
  Eigen::Index n = dv.size() + du.size();
  for (const Mat& w : dout) n += w.size();
  Vec out(n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < dv.cols(); ++i) {
    out.segment(k, dv.rows()) = dv.col(i);
    k += dv.rows();
    out.segment(k, du.rows()) = du.col(i);
    k += du.rows();
  }
  for (const Mat& w : dout) {
    out.segment(k, w.size()) = w.reshaped();
    k += w.size();
  }
  return out;
}

double Gradient::norm() const {
  double s = dv.squaredNorm() + du.squaredNorm();
  for (const Mat& w : dout) s += w.squaredNorm();
  return std::sqrt(s);
}

Gradient zero_gradient(const UnitLayerNet& net) {
  Gradient g;
  g.dv = Mat::Zero(net.nv(), net.width());
  g.du = Mat::Zero(net.nu(), net.width());
  for (const Mat& w : net.out_map().mats) {
    g.dout.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  return g;
}

Gradient unflatten_gradient(const UnitLayerNet& net, const Vec& flat) {
  UnitLayerNet shape = net;
  shape.assign(flat);
  Gradient g;
  g.dv = shape.v();
  g.du = shape.u();
  g.dout = shape.out_map().mats;
  return g;
}

}  // namespace s2s
