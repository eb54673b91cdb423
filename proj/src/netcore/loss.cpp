#include <algorithm>
#include <cmath>
#include <string>

#include "s2s/netcore.hpp"

namespace s2s {

namespace {

struct Head {
  Vec w;  // row D of V_i
  Mat k;  // R x (D+1)
  Mat q;  // R x (D+1)
};

Head unpack_head(const ActivationKind& act, const Vec& v, const Vec& u) {
  const auto& g = act.geometry();
  const int td = g.token_dim();
  const int r = g.head_rank;
  Head h;
  h.w.resize(td);
  for (int a = 0; a < td; ++a) h.w[a] = v[g.embed_dim + td * a];
  h.k = u.head(r * td).reshaped(r, td);
  h.q = u.segment(r * td, r * td).reshaped(r, td);
  return h;
}

Mat token_matrix(const ActivationKind& act, const Vec& x) {
  const auto& g = act.geometry();
  return x.reshaped(g.token_dim(), g.tokens());
}

void check_input(const UnitLayerNet& net, Eigen::Index cols) {
  if (cols != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(cols) +
                     " entries, net expects " +
                     std::to_string(net.input_dim()));
  }
}

void check_data(const UnitLayerNet& net, const Dataset& data) {
  if (data.size() == 0) throw InvalidInput("dataset is empty");
  data.validate();
  check_input(net, data.input_dim());
  if (data.output_dim() != net.output_dim()) {
    throw ShapeError("targets have " + std::to_string(data.output_dim()) +
                     " outputs, net produces " +
                     std::to_string(net.output_dim()));
  }
}

// Composite linear map M with f(x) = M x for linear-fc nets.
Mat linear_map(const UnitLayerNet& net) {
  const OutMap& out = net.out_map();
  Mat m = net.product();
  switch (out.kind) {
    case OutMap::Kind::kIdentity:
      return m;
    case OutMap::Kind::kDeepLinearChain:
      for (const Mat& w : out.mats) m = w * m;
      return m;
    case OutMap::Kind::kSkipLinear: {
      const Mat& w3 = out.mats[0];
      const Mat& w4 = out.mats[1];
      const Mat& u = net.u();
      switch (out.pattern) {
        case SkipPattern::kNone:
          return w4 * (w3 * m);
        case SkipPattern::kSkip1:
          return w4 * (w3 * (m + u.transpose()));
        case SkipPattern::kSkip2:
          return w4 * (w3 * m + u.transpose());
      }
    }
  }
  return m;
}

// Parameter gradients from G = dL/dM for linear-fc nets.
Gradient linear_backprop(const UnitLayerNet& net, const Mat& g) {
  const OutMap& out = net.out_map();
  const Mat& v = net.v();
  const Mat& u = net.u();
  Gradient grad;
  switch (out.kind) {
    case OutMap::Kind::kIdentity:
      grad.dv = g * u;
      grad.du = g.transpose() * v;
      return grad;
    case OutMap::Kind::kDeepLinearChain: {
      const auto& ws = out.mats;
      const std::size_t n = ws.size();
      // prefix[l] = W_l ... W_1 V U^T (prefix[0] = V U^T)
      std::vector<Mat> prefix(n + 1);
      prefix[0] = net.product();
      for (std::size_t l = 0; l < n; ++l) prefix[l + 1] = ws[l] * prefix[l];
      // suffix[l] = W_n ... W_{l+1}, identity for l = n
      std::vector<Mat> suffix(n + 1);
      suffix[n] = Mat::Identity(ws.back().rows(), ws.back().rows());
      for (std::size_t l = n; l-- > 0;) suffix[l] = suffix[l + 1] * ws[l];
      for (std::size_t l = 0; l < n; ++l) {
        grad.dout.push_back(suffix[l + 1].transpose() * g *
                            prefix[l].transpose());
      }
      const Mat b = suffix[0];
      grad.dv = b.transpose() * g * u;
      grad.du = g.transpose() * (b * v);
      return grad;
    }
    case OutMap::Kind::kSkipLinear: {
      const Mat& w3 = out.mats[0];
      const Mat& w4 = out.mats[1];
      const Eigen::Index h = v.cols();
      Mat inner;  // the factor left of U^T, so that M = inner * U^T
      Mat below;  // the factor W4 multiplies
      Mat dw3;
      switch (out.pattern) {
        case SkipPattern::kNone:
          below = w3 * v;
          inner = w4 * below;
          dw3 = w4.transpose() * g * (u * v.transpose());
          break;
        case SkipPattern::kSkip1: {
          const Mat vi = v + Mat::Identity(h, h);
          below = w3 * vi;
          inner = w4 * below;
          dw3 = w4.transpose() * g * (u * vi.transpose());
          break;
        }
        case SkipPattern::kSkip2:
          below = w3 * v + Mat::Identity(h, h);
          inner = w4 * below;
          dw3 = w4.transpose() * g * (u * v.transpose());
          break;
      }
      const Mat w43 = w4 * w3;
      grad.dv = w43.transpose() * g * u;
      grad.du = g.transpose() * inner;
      grad.dout.push_back(dw3);
      grad.dout.push_back(g * (below * u.transpose()).transpose());
      return grad;
    }
  }
  return grad;
}

Mat apply_sigma(const ActivationKind& act, const Mat& a) {
  switch (act.tag()) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kConv1dLinear:
      return a;
    case ActivationTag::kQuadraticFc:
      return a.array().square().matrix();
    default:
      return a.unaryExpr([&act](double z) { return act.sigma(z); });
  }
}

Mat apply_sigma_prime(const ActivationKind& act, const Mat& a) {
  switch (act.tag()) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kConv1dLinear:
      return Mat::Ones(a.rows(), a.cols());
    case ActivationTag::kQuadraticFc:
      return 2.0 * a;
    default:
      return a.unaryExpr([&act](double z) { return act.sigma_prime(z); });
  }
}

Mat attention_batch(const UnitLayerNet& net, const Mat& x) {
  const ActivationKind& act = net.activation();
  const auto& g = act.geometry();
  std::vector<Head> heads;
  for (int i = 0; i < net.width(); ++i) {
    heads.push_back(unpack_head(act, net.v().col(i), net.u().col(i)));
  }
  Mat out(x.rows(), 1);
  for (Eigen::Index mu = 0; mu < x.rows(); ++mu) {
    const Vec row = x.row(mu).transpose();
    const Mat tok = token_matrix(act, row);
    const Mat s = tok * tok.transpose();
    const Vec xq = tok.col(g.context_len);
    double y = tok(g.embed_dim, g.context_len);
    for (const Head& h : heads) {
      y += (h.k * (s * h.w)).dot(h.q * xq);
    }
    out(mu, 0) = y;
  }
  return out;
}

Gradient attention_grad(const UnitLayerNet& net, const Dataset& data) {
  const ActivationKind& act = net.activation();
  const auto& g = act.geometry();
  const int td = g.token_dim();
  const int r = g.head_rank;
  const int h = net.width();
  const double inv_p = 1.0 / data.size();
  std::vector<Head> heads;
  for (int i = 0; i < h; ++i) {
    heads.push_back(unpack_head(act, net.v().col(i), net.u().col(i)));
  }
  Gradient grad = zero_gradient(net);
  for (int mu = 0; mu < data.size(); ++mu) {
    const Vec row = data.x.row(mu).transpose();
    const Mat tok = token_matrix(act, row);
    const Mat s = tok * tok.transpose();
    const Vec xq = tok.col(g.context_len);
    double pred = tok(g.embed_dim, g.context_len);
    std::vector<Vec> sw(h), kk(h), qq(h);
    for (int i = 0; i < h; ++i) {
      sw[i] = s * heads[i].w;
      kk[i] = heads[i].k * sw[i];
      qq[i] = heads[i].q * xq;
      pred += kk[i].dot(qq[i]);
    }
    const double coef = -(data.y(mu, 0) - pred) * inv_p;
    for (int i = 0; i < h; ++i) {
      const Vec dw = s * (heads[i].k.transpose() * qq[i]);
      for (int a = 0; a < td; ++a) grad.dv(g.embed_dim + td * a, i) += coef * dw[a];
      const Mat dk = qq[i] * sw[i].transpose();
      const Mat dq = kk[i] * xq.transpose();
      grad.du.col(i).head(r * td) += coef * dk.reshaped();
      grad.du.col(i).segment(r * td, r * td) += coef * dq.reshaped();
    }
  }
  return grad;
}

Gradient conv_grad(const UnitLayerNet& net, const Dataset& data) {
  const ActivationKind& act = net.activation();
  const int npos = net.nv();
  const double inv_p = 1.0 / data.size();
  std::vector<Mat> a(npos), s(npos);
  Mat f = Mat::Zero(data.size(), 1);
  for (int p = 0; p < npos; ++p) {
    a[p] = data.x.middleCols(2 * p, 2) * net.u();
    s[p] = apply_sigma(act, a[p]);
    f += s[p] * net.v().row(p).transpose();
  }
  const Vec r = data.y.col(0) - f.col(0);
  Gradient grad = zero_gradient(net);
  for (int p = 0; p < npos; ++p) {
    grad.dv.row(p) = -inv_p * (r.transpose() * s[p]);
    const Mat back = (r * net.v().row(p)).cwiseProduct(
        apply_sigma_prime(act, a[p]));
    grad.du -= inv_p * data.x.middleCols(2 * p, 2).transpose() * back;
  }
  return grad;
}

void check_stats(const UnitLayerNet& net, const DataStats& stats) {
  const auto fm = net.activation().feature_map();
  if (!fm) {
    throw Unsupported(net.activation().name() +
                      " has no moment representation; use a dataset");
  }
  if (*fm != stats.features) {
    throw InvalidInput("statistics were computed for a different feature map");
  }
  const Mat a = moment_map(net);
  if (stats.yz.rows() != a.rows() || stats.yz.cols() != a.cols() ||
      stats.zz.rows() != a.cols() || stats.zz.cols() != a.cols()) {
    throw ShapeError("statistics shape (" + std::to_string(stats.yz.rows()) +
                     "x" + std::to_string(stats.yz.cols()) +
                     ") does not match the net's moment map (" +
                     std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ")");
  }
}

}  // namespace

Mat forward_batch(const UnitLayerNet& net, const Mat& x) {
  check_input(net, x.cols());
  const ActivationKind& act = net.activation();
  if (act.tag() == ActivationTag::kLinearAttention) {
    return attention_batch(net, x);
  }
  if (act.tag() == ActivationTag::kLinearFc) {
    return x * linear_map(net).transpose();
  }
  if (act.is_conv()) {
    Mat f = Mat::Zero(x.rows(), 1);
    for (int p = 0; p < net.nv(); ++p) {
      f += apply_sigma(act, x.middleCols(2 * p, 2) * net.u()) *
           net.v().row(p).transpose();
    }
    return f;
  }
  return apply_sigma(act, x * net.u()) * net.v().transpose();
}

Vec forward(const UnitLayerNet& net, const Vec& x) {
  return forward_batch(net, x.transpose()).row(0).transpose();
}

double loss(const UnitLayerNet& net, const Dataset& data) {
  check_data(net, data);
  const Mat r = data.y - forward_batch(net, data.x);
  return 0.5 * r.squaredNorm() / data.size();
}

Gradient grad(const UnitLayerNet& net, const Dataset& data) {
  check_data(net, data);
  const ActivationKind& act = net.activation();
  const double inv_p = 1.0 / data.size();
  if (act.tag() == ActivationTag::kLinearAttention) {
    return attention_grad(net, data);
  }
  if (act.is_conv()) return conv_grad(net, data);
  if (act.tag() == ActivationTag::kLinearFc) {
    const Mat r = data.y - forward_batch(net, data.x);
    return linear_backprop(net, -inv_p * r.transpose() * data.x);
  }
  const Mat a = data.x * net.u();
  const Mat s = apply_sigma(act, a);
  const Mat r = data.y - s * net.v().transpose();
  Gradient g;
  g.dv = -inv_p * r.transpose() * s;
  g.du = -inv_p * data.x.transpose() *
         (r * net.v()).cwiseProduct(apply_sigma_prime(act, a));
  return g;
}

Mat moment_map(const UnitLayerNet& net) {
  const ActivationKind& act = net.activation();
  const Mat& v = net.v();
  const Mat& u = net.u();
  switch (act.tag()) {
    case ActivationTag::kLinearFc:
      return linear_map(net);
    case ActivationTag::kConv1dLinear: {
      const Mat c = v * u.transpose();  // npos x 2
      Mat a(1, 2 * c.rows());
      for (Eigen::Index p = 0; p < c.rows(); ++p) {
        a(0, 2 * p) = c(p, 0);
        a(0, 2 * p + 1) = c(p, 1);
      }
      return a;
    }
    case ActivationTag::kQuadraticFc: {
      const Eigen::Index d = u.rows();
      Mat a = Mat::Zero(v.rows(), d * d);
      for (Eigen::Index i = 0; i < v.cols(); ++i) {
        const Mat uu = u.col(i) * u.col(i).transpose();
        for (Eigen::Index o = 0; o < v.rows(); ++o) {
          a.row(o) += v(o, i) * uu.reshaped().transpose();
        }
      }
      return a;
    }
    case ActivationTag::kLinearAttention: {
      const int td = act.geometry().token_dim();
      Mat a = Mat::Zero(1, td * td * td);
      for (int i = 0; i < net.width(); ++i) {
        const Head h = unpack_head(act, v.col(i), u.col(i));
        const Mat kq = h.k.transpose() * h.q;  // td x td, index (b, c)
        for (int c = 0; c < td; ++c)
          for (int b = 0; b < td; ++b)
            for (int aa = 0; aa < td; ++aa)
              a(0, aa + td * (b + td * c)) += h.w[aa] * kq(b, c);
      }
      return a;
    }
    default:
      throw Unsupported(act.name() + " has no moment representation");
  }
}

Vec moment_features(const ActivationKind& act, const Vec& x, double* offset) {
  if (offset) *offset = 0.0;
  const auto fm = act.feature_map();
  if (!fm) throw Unsupported(act.name() + " has no moment representation");
  switch (*fm) {
    case FeatureMap::kIdentity:
      return x;
    case FeatureMap::kOuter:
      return (x * x.transpose()).reshaped();
    case FeatureMap::kAttention: {
      const auto& g = act.geometry();
      const int td = g.token_dim();
      if (x.size() != td * g.tokens()) {
        throw ShapeError("attention input has wrong size");
      }
      const Mat tok = token_matrix(act, x);
      const Mat s = tok * tok.transpose();
      const Vec xq = tok.col(g.context_len);
      if (offset) *offset = tok(g.embed_dim, g.context_len);
      Vec t(td * td * td);
      for (int c = 0; c < td; ++c)
        for (int b = 0; b < td; ++b)
          for (int a = 0; a < td; ++a) t[a + td * (b + td * c)] = s(a, b) * xq[c];
      return t;
    }
  }
  return x;
}

Gradient moment_backprop(const UnitLayerNet& net, const Mat& da) {
  const ActivationKind& act = net.activation();
  const Mat& v = net.v();
  const Mat& u = net.u();
  switch (act.tag()) {
    case ActivationTag::kLinearFc:
      return linear_backprop(net, da);
    case ActivationTag::kConv1dLinear: {
      const Eigen::Index npos = v.rows();
      Mat gc(npos, 2);
      for (Eigen::Index p = 0; p < npos; ++p) {
        gc(p, 0) = da(0, 2 * p);
        gc(p, 1) = da(0, 2 * p + 1);
      }
      Gradient g;
      g.dv = gc * u;
      g.du = gc.transpose() * v;
      return g;
    }
    case ActivationTag::kQuadraticFc: {
      const Eigen::Index d = u.rows();
      Gradient g = zero_gradient(net);
      for (Eigen::Index o = 0; o < v.rows(); ++o) {
        const Mat go = da.row(o).reshaped(d, d);
        const Mat sym = go + go.transpose();
        for (Eigen::Index i = 0; i < v.cols(); ++i) {
          g.dv(o, i) = u.col(i).dot(go * u.col(i));
          g.du.col(i) += v(o, i) * (sym * u.col(i));
        }
      }
      return g;
    }
    case ActivationTag::kLinearAttention: {
      const auto& geo = act.geometry();
      const int td = geo.token_dim();
      const int r = geo.head_rank;
      Gradient g = zero_gradient(net);
      for (int i = 0; i < net.width(); ++i) {
        const Head h = unpack_head(act, v.col(i), u.col(i));
        const Mat kq = h.k.transpose() * h.q;
        Vec dw = Vec::Zero(td);
        Mat gw = Mat::Zero(td, td);
        for (int c = 0; c < td; ++c)
          for (int b = 0; b < td; ++b)
            for (int a = 0; a < td; ++a) {
              const double e = da(0, a + td * (b + td * c));
              dw[a] += e * kq(b, c);
              gw(b, c) += e * h.w[a];
            }
        for (int a = 0; a < td; ++a) g.dv(geo.embed_dim + td * a, i) = dw[a];
        const Mat dk = h.q * gw.transpose();
        const Mat dq = h.k * gw;
        g.du.col(i).head(r * td) = dk.reshaped();
        g.du.col(i).segment(r * td, r * td) = dq.reshaped();
      }
      return g;
    }
    default:
      throw Unsupported(act.name() + " has no moment representation");
  }
}

double loss(const UnitLayerNet& net, const DataStats& stats) {
  check_stats(net, stats);
  const Mat a = moment_map(net);
  const double l = 0.5 * (stats.yy - 2.0 * a.cwiseProduct(stats.yz).sum() +
                          (a * stats.zz).cwiseProduct(a).sum());
  return std::max(l, 0.0);
}

Gradient grad(const UnitLayerNet& net, const DataStats& stats) {
  check_stats(net, stats);
  const Mat a = moment_map(net);
  return moment_backprop(net, -(stats.yz - a * stats.zz));
}

Gradient grad_fd(const UnitLayerNet& net, const Dataset& data, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be > 0");
  UnitLayerNet probe = net;
  const Vec theta = net.flatten();
  Vec out(theta.size());
  Vec work = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    work[k] = theta[k] + h;
    probe.assign(work);
    const double up = loss(probe, data);
    work[k] = theta[k] - h;
    probe.assign(work);
    const double down = loss(probe, data);
    work[k] = theta[k];
    out[k] = (up - down) / (2.0 * h);
  }
  return unflatten_gradient(net, out);
}

}  // namespace s2s
