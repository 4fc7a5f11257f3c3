#include "histo/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "histo/error.hpp"

namespace histo::nn {

Tensor Tape::pop() {
  if (stack_.empty()) throw Error(ErrorCode::InvalidArgument, "tape underflow in backward pass");
  Tensor t = std::move(stack_.back());
  stack_.pop_back();
  return t;
}

void accumulate(ParamMap& grads, const std::string& name, const Tensor& delta) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    grads.emplace(name, delta);
    return;
  }
  if (it->second.shape() != delta.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient shape change for " + name);
  }
  for (std::size_t i = 0; i < delta.size(); ++i) it->second[i] += delta[i];
}

namespace {

const Tensor& lookup(const ParamMap& params, const std::string& name, const Shape& expected) {
  auto it = params.find(name);
  if (it == params.end()) throw Error(ErrorCode::ShapeMismatch, "missing parameter " + name);
  if (it->second.shape() != expected) {
    throw Error(ErrorCode::ShapeMismatch, name + " has shape " + shape_str(it->second.shape()) +
                                              ", expected " + shape_str(expected));
  }
  return it->second;
}

void require_rank4(const Shape& in, const std::string& who) {
  if (in.size() != 4) {
    throw Error(ErrorCode::ShapeMismatch, who + " expects (N,C,H,W), got " + shape_str(in));
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor to_float(const Shape& shape, const std::vector<double>& acc) {
  Tensor t(shape);
  for (std::size_t i = 0; i < acc.size(); ++i) t[i] = static_cast<float>(acc[i]);
  return t;
}

void uniform_fill(Tensor& t, Rng& rng, double bound) {
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

// Output indices o in [lo, hi) for which o·stride + offset lands in [0, in_size).
void valid_range(int offset, int in_size, int stride, int out_size, int& lo, int& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = in_size - 1 - offset;
  hi = last < 0 ? 0 : std::min(out_size, last / stride + 1);
  if (hi < lo) hi = lo;
}

struct ConvGeometry {
  int height, width, out_height, out_width, kernel, stride, pad;

  static ConvGeometry make(int h, int w, int kernel, int stride) {
    const int pad = kernel / 2;
    return {h, w, (h + 2 * pad - kernel) / stride + 1, (w + 2 * pad - kernel) / stride + 1,
            kernel, stride, pad};
  }
};

// acc[oy, ox] += weight · x[oy·s − p + ky, ox·s − p + kx]
void conv_tap_forward(const ConvGeometry& g, int ky, int kx, double weight, const float* x,
                      double* acc) {
  int oy_lo, oy_hi, ox_lo, ox_hi;
  valid_range(ky - g.pad, g.height, g.stride, g.out_height, oy_lo, oy_hi);
  valid_range(kx - g.pad, g.width, g.stride, g.out_width, ox_lo, ox_hi);
  for (int oy = oy_lo; oy < oy_hi; ++oy) {
    const float* xrow = x + static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.width;
    double* arow = acc + static_cast<std::size_t>(oy) * g.out_width;
    if (g.stride == 1) {
      const float* xs = xrow + (kx - g.pad);
      for (int ox = ox_lo; ox < ox_hi; ++ox) arow[ox] += weight * xs[ox];
    } else {
      for (int ox = ox_lo; ox < ox_hi; ++ox) {
        arow[ox] += weight * xrow[ox * g.stride - g.pad + kx];
      }
    }
  }
}

// Returns Σ grad·x for the tap and adds weight·grad into dx.
double conv_tap_backward(const ConvGeometry& g, int ky, int kx, double weight, const float* x,
                         const float* grad, double* dx) {
  int oy_lo, oy_hi, ox_lo, ox_hi;
  valid_range(ky - g.pad, g.height, g.stride, g.out_height, oy_lo, oy_hi);
  valid_range(kx - g.pad, g.width, g.stride, g.out_width, ox_lo, ox_hi);
  double dw = 0.0;
  for (int oy = oy_lo; oy < oy_hi; ++oy) {
    const std::size_t in_row = static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.width;
    const float* grow = grad + static_cast<std::size_t>(oy) * g.out_width;
    for (int ox = ox_lo; ox < ox_hi; ++ox) {
      const std::size_t idx = in_row + ox * g.stride - g.pad + kx;
      dw += static_cast<double>(grow[ox]) * x[idx];
      dx[idx] += weight * grow[ox];
    }
  }
  return dw;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               bool bias)
    : Layer(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      bias_(bias) {
  if (in_ < 1 || out_ < 1 || kernel_ < 1 || kernel_ % 2 == 0 || stride_ < 1) {
    throw Error(ErrorCode::ShapeMismatch, "invalid conv2d configuration for " + this->name());
  }
}

Shape Conv2d::output_shape(const Shape& in) const {
  require_rank4(in, name());
  if (in[1] != in_) {
    throw Error(ErrorCode::ShapeMismatch, name() + " expects " + std::to_string(in_) +
                                              " channels, got " + std::to_string(in[1]));
  }
  const auto g = ConvGeometry::make(in[2], in[3], kernel_, stride_);
  if (g.out_height < 1 || g.out_width < 1) {
    throw Error(ErrorCode::ShapeMismatch, name() + ": spatial size collapses to zero");
  }
  return {in[0], out_, g.out_height, g.out_width};
}

Tensor Conv2d::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  const Shape out_shape = output_shape(x.shape());
  const Tensor& w = lookup(params, weight_name(), {out_, in_, kernel_, kernel_});
  const Tensor* b = bias_ ? &lookup(params, bias_name(), {out_}) : nullptr;
  const int n_batch = x.dim(0);
  const auto g = ConvGeometry::make(x.dim(2), x.dim(3), kernel_, stride_);
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;

  Tensor y(out_shape);
  std::vector<double> acc(out_plane);
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < out_; ++co) {
      std::fill(acc.begin(), acc.end(), b ? (*b)[co] : 0.0);
      for (int ci = 0; ci < in_; ++ci) {
        const float* xp = x.data() + (static_cast<std::size_t>(n) * in_ + ci) * in_plane;
        const float* wp = w.data() + (static_cast<std::size_t>(co) * in_ + ci) * kernel_ * kernel_;
        for (int ky = 0; ky < kernel_; ++ky)
          for (int kx = 0; kx < kernel_; ++kx)
            conv_tap_forward(g, ky, kx, wp[ky * kernel_ + kx], xp, acc.data());
      }
      float* yp = y.data() + (static_cast<std::size_t>(n) * out_ + co) * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) yp[i] = static_cast<float>(acc[i]);
    }
  }
  if (tape) tape->push(x);
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                        ParamMap& grads) const {
  const Tensor x = tape.pop();
  const Tensor& w = lookup(params, weight_name(), {out_, in_, kernel_, kernel_});
  const int n_batch = x.dim(0);
  const auto g = ConvGeometry::make(x.dim(2), x.dim(3), kernel_, stride_);
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;

  std::vector<double> dx(x.size(), 0.0);
  std::vector<double> dw(w.size(), 0.0);
  std::vector<double> db(out_, 0.0);
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < out_; ++co) {
      const float* gp = grad_out.data() + (static_cast<std::size_t>(n) * out_ + co) * out_plane;
      if (bias_) {
        double s = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) s += gp[i];
        db[co] += s;
      }
      for (int ci = 0; ci < in_; ++ci) {
        const std::size_t xoff = (static_cast<std::size_t>(n) * in_ + ci) * in_plane;
        const std::size_t woff = (static_cast<std::size_t>(co) * in_ + ci) * kernel_ * kernel_;
        for (int ky = 0; ky < kernel_; ++ky)
          for (int kx = 0; kx < kernel_; ++kx) {
            const std::size_t wi = woff + ky * kernel_ + kx;
            dw[wi] += conv_tap_backward(g, ky, kx, w[wi], x.data() + xoff, gp, dx.data() + xoff);
          }
      }
    }
  }
  accumulate(grads, weight_name(), to_float(w.shape(), dw));
  if (bias_) accumulate(grads, bias_name(), to_float({out_}, db));
  return to_float(x.shape(), dx);
}

void Conv2d::init_params(ParamMap& params, Rng& rng) const {
  Tensor w({out_, in_, kernel_, kernel_});
  uniform_fill(w, rng, 1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_)));
  params[weight_name()] = std::move(w);
  if (bias_) params[bias_name()] = Tensor({out_});
}

std::vector<std::string> Conv2d::trainable_params() const {
  if (bias_) return {weight_name(), bias_name()};
  return {weight_name()};
}

nlohmann::json Conv2d::config() const {
  return {{"type", type()},   {"name", name()},       {"in", in_},    {"out", out_},
          {"kernel", kernel_}, {"stride", stride_}, {"bias", bias_}};
}

// ---------------------------------------------------------------------------
// DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(std::string name, int channels, int kernel, int stride)
    : Layer(std::move(name)), channels_(channels), kernel_(kernel), stride_(stride) {
  if (channels_ < 1 || kernel_ < 1 || kernel_ % 2 == 0 || stride_ < 1) {
    throw Error(ErrorCode::ShapeMismatch, "invalid depthwise configuration for " + this->name());
  }
}

Shape DepthwiseConv2d::output_shape(const Shape& in) const {
  require_rank4(in, name());
  if (in[1] != channels_) {
    throw Error(ErrorCode::ShapeMismatch, name() + " expects " + std::to_string(channels_) +
                                              " channels, got " + std::to_string(in[1]));
  }
  const auto g = ConvGeometry::make(in[2], in[3], kernel_, stride_);
  if (g.out_height < 1 || g.out_width < 1) {
    throw Error(ErrorCode::ShapeMismatch, name() + ": spatial size collapses to zero");
  }
  return {in[0], channels_, g.out_height, g.out_width};
}

Tensor DepthwiseConv2d::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  const Shape out_shape = output_shape(x.shape());
  const Tensor& w = lookup(params, weight_name(), {channels_, 1, kernel_, kernel_});
  const auto g = ConvGeometry::make(x.dim(2), x.dim(3), kernel_, stride_);
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
  Tensor y(out_shape);
  std::vector<double> acc(out_plane);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < channels_; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const std::size_t plane = static_cast<std::size_t>(n) * channels_ + c;
      const float* xp = x.data() + plane * in_plane;
      const float* wp = w.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
      for (int ky = 0; ky < kernel_; ++ky)
        for (int kx = 0; kx < kernel_; ++kx)
          conv_tap_forward(g, ky, kx, wp[ky * kernel_ + kx], xp, acc.data());
      float* yp = y.data() + plane * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) yp[i] = static_cast<float>(acc[i]);
    }
  }
  if (tape) tape->push(x);
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                                 ParamMap& grads) const {
  const Tensor x = tape.pop();
  const Tensor& w = lookup(params, weight_name(), {channels_, 1, kernel_, kernel_});
  const auto g = ConvGeometry::make(x.dim(2), x.dim(3), kernel_, stride_);
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
  std::vector<double> dx(x.size(), 0.0);
  std::vector<double> dw(w.size(), 0.0);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < channels_; ++c) {
      const std::size_t plane = static_cast<std::size_t>(n) * channels_ + c;
      const float* gp = grad_out.data() + plane * out_plane;
      for (int ky = 0; ky < kernel_; ++ky)
        for (int kx = 0; kx < kernel_; ++kx) {
          const std::size_t wi = static_cast<std::size_t>(c) * kernel_ * kernel_ + ky * kernel_ + kx;
          dw[wi] += conv_tap_backward(g, ky, kx, w[wi], x.data() + plane * in_plane, gp,
                                      dx.data() + plane * in_plane);
        }
    }
  }
  accumulate(grads, weight_name(), to_float(w.shape(), dw));
  return to_float(x.shape(), dx);
}

void DepthwiseConv2d::init_params(ParamMap& params, Rng& rng) const {
  Tensor w({channels_, 1, kernel_, kernel_});
  uniform_fill(w, rng, 1.0 / kernel_);
  params[weight_name()] = std::move(w);
}

std::vector<std::string> DepthwiseConv2d::trainable_params() const { return {weight_name()}; }

nlohmann::json DepthwiseConv2d::config() const {
  return {{"type", type()},      {"name", name()},     {"channels", channels_},
          {"kernel", kernel_}, {"stride", stride_}};
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::string name, int channels) : Layer(std::move(name)), channels_(channels) {
  if (channels_ < 1) throw Error(ErrorCode::ShapeMismatch, "batch norm needs channels");
}

Shape BatchNorm::output_shape(const Shape& in) const {
  if (in.size() < 2 || in[1] != channels_) {
    throw Error(ErrorCode::ShapeMismatch,
                name() + " expects " + std::to_string(channels_) + " channels, got " + shape_str(in));
  }
  return in;
}

Tensor BatchNorm::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  output_shape(x.shape());
  const Tensor& gamma = lookup(params, gamma_name(), {channels_});
  const Tensor& beta = lookup(params, beta_name(), {channels_});
  const Tensor& mean = lookup(params, mean_name(), {channels_});
  const Tensor& var = lookup(params, var_name(), {channels_});
  const std::size_t spatial = x.size() / (static_cast<std::size_t>(x.dim(0)) * channels_);
  Tensor y(x.shape());
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < channels_; ++c) {
      const double scale = gamma[c] / std::sqrt(static_cast<double>(var[c]) + kEps);
      const double shift = beta[c] - scale * mean[c];
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        y[off + i] = static_cast<float>(scale * x[off + i] + shift);
      }
    }
  }
  if (tape) {
    if (tape->record_batch_stats) {
      BatchStats stats{std::vector<double>(channels_, 0.0), std::vector<double>(channels_, 0.0)};
      const double count = static_cast<double>(x.dim(0)) * spatial;
      for (int c = 0; c < channels_; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < x.dim(0); ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
          for (std::size_t i = 0; i < spatial; ++i) {
            sum += x[off + i];
            sq += static_cast<double>(x[off + i]) * x[off + i];
          }
        }
        stats.mean[c] = sum / count;
        stats.var[c] = std::max(0.0, sq / count - stats.mean[c] * stats.mean[c]);
      }
      tape->batch_stats[name()] = std::move(stats);
    }
    tape->push(x);
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                           ParamMap& grads) const {
  const Tensor x = tape.pop();
  const Tensor& gamma = lookup(params, gamma_name(), {channels_});
  const Tensor& mean = lookup(params, mean_name(), {channels_});
  const Tensor& var = lookup(params, var_name(), {channels_});
  const std::size_t spatial = x.size() / (static_cast<std::size_t>(x.dim(0)) * channels_);
  Tensor dx(x.shape());
  std::vector<double> dgamma(channels_, 0.0), dbeta(channels_, 0.0);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < channels_; ++c) {
      const double inv_std = 1.0 / std::sqrt(static_cast<double>(var[c]) + kEps);
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        const double g = grad_out[off + i];
        dgamma[c] += g * (x[off + i] - mean[c]) * inv_std;
        dbeta[c] += g;
        dx[off + i] = static_cast<float>(g * gamma[c] * inv_std);
      }
    }
  }
  accumulate(grads, gamma_name(), to_float({channels_}, dgamma));
  accumulate(grads, beta_name(), to_float({channels_}, dbeta));
  return dx;
}

void BatchNorm::init_params(ParamMap& params, Rng& /*rng*/) const {
  params[gamma_name()] = Tensor({channels_}, 1.0f);
  params[beta_name()] = Tensor({channels_}, 0.0f);
  params[mean_name()] = Tensor({channels_}, 0.0f);
  params[var_name()] = Tensor({channels_}, 1.0f);
}

std::vector<std::string> BatchNorm::trainable_params() const { return {gamma_name(), beta_name()}; }

nlohmann::json BatchNorm::config() const {
  return {{"type", type()}, {"name", name()}, {"channels", channels_}};
}

// ---------------------------------------------------------------------------
// Swish, Sigmoid

Tensor Swish::forward(const Tensor& x, const ParamMap&, Tape* tape) const {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(x[i] * sigmoid(x[i]));
  if (tape) tape->push(x);
  return y;
}

Tensor Swish::backward(const Tensor& grad_out, const ParamMap&, Tape& tape, ParamMap&) const {
  const Tensor x = tape.pop();
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = sigmoid(x[i]);
    dx[i] = static_cast<float>(grad_out[i] * (s + x[i] * s * (1.0 - s)));
  }
  return dx;
}

nlohmann::json Swish::config() const { return {{"type", type()}, {"name", name()}}; }

Tensor Sigmoid::forward(const Tensor& x, const ParamMap&, Tape* tape) const {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(sigmoid(x[i]));
  if (tape) tape->push(y);
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out, const ParamMap&, Tape& tape, ParamMap&) const {
  const Tensor y = tape.pop();
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    dx[i] = static_cast<float>(static_cast<double>(grad_out[i]) * y[i] * (1.0 - y[i]));
  }
  return dx;
}

nlohmann::json Sigmoid::config() const { return {{"type", type()}, {"name", name()}}; }

// ---------------------------------------------------------------------------
// GlobalAvgPool

Shape GlobalAvgPool::output_shape(const Shape& in) const {
  require_rank4(in, name());
  return {in[0], in[1]};
}

Tensor GlobalAvgPool::forward(const Tensor& x, const ParamMap&, Tape* tape) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t planes = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
  const std::size_t spatial = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y(out_shape);
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) s += x[p * spatial + i];
    y[p] = static_cast<float>(s / static_cast<double>(spatial));
  }
  if (tape) {
    tape->push(Tensor({4}, {static_cast<float>(x.dim(0)), static_cast<float>(x.dim(1)),
                            static_cast<float>(x.dim(2)), static_cast<float>(x.dim(3))}));
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, const ParamMap&, Tape& tape,
                               ParamMap&) const {
  const Tensor dims = tape.pop();
  const Shape in_shape = {static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                          static_cast<int>(dims[2]), static_cast<int>(dims[3])};
  const std::size_t planes = static_cast<std::size_t>(in_shape[0]) * in_shape[1];
  const std::size_t spatial = static_cast<std::size_t>(in_shape[2]) * in_shape[3];
  Tensor dx(in_shape);
  for (std::size_t p = 0; p < planes; ++p) {
    const float g = static_cast<float>(grad_out[p] / static_cast<double>(spatial));
    std::fill_n(dx.data() + p * spatial, spatial, g);
  }
  return dx;
}

nlohmann::json GlobalAvgPool::config() const { return {{"type", type()}, {"name", name()}}; }

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int in_features, int out_features)
    : Layer(std::move(name)), in_(in_features), out_(out_features) {
  if (in_ < 1 || out_ < 1) throw Error(ErrorCode::ShapeMismatch, "invalid dense size");
}

Shape Dense::output_shape(const Shape& in) const {
  if (in.size() < 2) throw Error(ErrorCode::ShapeMismatch, name() + ": input needs a batch axis");
  const std::size_t features = shape_size(in) / std::max(in[0], 1);
  if (in[0] < 1 || static_cast<int>(features) != in_) {
    throw Error(ErrorCode::ShapeMismatch, name() + " expects " + std::to_string(in_) +
                                              " features, got " + shape_str(in));
  }
  return {in[0], out_};
}

Tensor Dense::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  const Shape out_shape = output_shape(x.shape());
  const Tensor& w = lookup(params, weight_name(), {out_, in_});
  const Tensor& b = lookup(params, bias_name(), {out_});
  Tensor y(out_shape);
  for (int n = 0; n < x.dim(0); ++n) {
    const float* xr = x.data() + static_cast<std::size_t>(n) * in_;
    for (int o = 0; o < out_; ++o) {
      const float* wr = w.data() + static_cast<std::size_t>(o) * in_;
      double s = b[o];
      for (int i = 0; i < in_; ++i) s += static_cast<double>(wr[i]) * xr[i];
      y[static_cast<std::size_t>(n) * out_ + o] = static_cast<float>(s);
    }
  }
  if (tape) tape->push(x);
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                       ParamMap& grads) const {
  const Tensor x = tape.pop();
  const Tensor& w = lookup(params, weight_name(), {out_, in_});
  const int n_batch = x.dim(0);
  std::vector<double> dw(w.size(), 0.0), db(out_, 0.0), dx(x.size(), 0.0);
  for (int n = 0; n < n_batch; ++n) {
    const float* xr = x.data() + static_cast<std::size_t>(n) * in_;
    double* dxr = dx.data() + static_cast<std::size_t>(n) * in_;
    for (int o = 0; o < out_; ++o) {
      const double g = grad_out[static_cast<std::size_t>(n) * out_ + o];
      if (g == 0.0) continue;
      db[o] += g;
      const float* wr = w.data() + static_cast<std::size_t>(o) * in_;
      double* dwr = dw.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        dwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  accumulate(grads, weight_name(), to_float(w.shape(), dw));
  accumulate(grads, bias_name(), to_float({out_}, db));
  return to_float(x.shape(), dx);
}

void Dense::init_params(ParamMap& params, Rng& rng) const {
  Tensor w({out_, in_});
  uniform_fill(w, rng, 1.0 / std::sqrt(static_cast<double>(in_)));
  params[weight_name()] = std::move(w);
  params[bias_name()] = Tensor({out_});
}

std::vector<std::string> Dense::trainable_params() const { return {weight_name(), bias_name()}; }

nlohmann::json Dense::config() const {
  return {{"type", type()}, {"name", name()}, {"in", in_}, {"out", out_}};
}

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(std::string name, std::vector<LayerPtr> children)
    : Layer(std::move(name)), children_(std::move(children)) {}

Shape Sequential::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& child : children_) s = child->output_shape(s);
  return s;
}

Tensor Sequential::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  if (children_.empty()) return x;
  Tensor h = children_.front()->forward(x, params, tape);
  for (std::size_t i = 1; i < children_.size(); ++i) h = children_[i]->forward(h, params, tape);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                            ParamMap& grads) const {
  Tensor g = grad_out;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
    g = (*it)->backward(g, params, tape, grads);
  }
  return g;
}

void Sequential::init_params(ParamMap& params, Rng& rng) const {
  for (const auto& child : children_) child->init_params(params, rng);
}

std::vector<std::string> Sequential::trainable_params() const {
  std::vector<std::string> out;
  for (const auto& child : children_) {
    auto names = child->trainable_params();
    out.insert(out.end(), names.begin(), names.end());
  }
  return out;
}

nlohmann::json Sequential::config() const {
  nlohmann::json kids = nlohmann::json::array();
  for (const auto& child : children_) kids.push_back(child->config());
  return {{"type", type()}, {"name", name()}, {"children", kids}};
}

int Sequential::layer_count() const {
  int n = 0;
  for (const auto& child : children_) n += child->layer_count();
  return n;
}

// ---------------------------------------------------------------------------
// SqueezeExcite

SqueezeExcite::SqueezeExcite(std::string name, int channels, int reduced_channels)
    : Layer(name),
      channels_(channels),
      reduced_(reduced_channels),
      gate_(name + ".gate",
            {std::make_shared<GlobalAvgPool>(name + ".pool"),
             std::make_shared<Dense>(name + ".reduce", channels, reduced_channels),
             std::make_shared<Swish>(name + ".act"),
             std::make_shared<Dense>(name + ".expand", reduced_channels, channels),
             std::make_shared<Sigmoid>(name + ".sigmoid")}) {}

const Dense& SqueezeExcite::reduce() const {
  return static_cast<const Dense&>(*gate_.children()[1]);
}

const Dense& SqueezeExcite::expand() const {
  return static_cast<const Dense&>(*gate_.children()[3]);
}

Shape SqueezeExcite::output_shape(const Shape& in) const {
  gate_.output_shape(in);
  return in;
}

Tensor SqueezeExcite::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  const Tensor s = gate_.forward(x, params, tape);
  const std::size_t spatial = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y(x.shape());
  for (std::size_t p = 0; p < s.size(); ++p) {
    const float gate = s[p];
    for (std::size_t i = 0; i < spatial; ++i) y[p * spatial + i] = x[p * spatial + i] * gate;
  }
  if (tape) {
    tape->push(x);
    tape->push(s);
  }
  return y;
}

Tensor SqueezeExcite::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                               ParamMap& grads) const {
  const Tensor s = tape.pop();
  const Tensor x = tape.pop();
  const std::size_t spatial = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor ds(s.shape());
  Tensor dx(x.shape());
  for (std::size_t p = 0; p < s.size(); ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) {
      const std::size_t idx = p * spatial + i;
      acc += static_cast<double>(grad_out[idx]) * x[idx];
      dx[idx] = grad_out[idx] * s[p];
    }
    ds[p] = static_cast<float>(acc);
  }
  const Tensor dx_gate = gate_.backward(ds, params, tape, grads);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_gate[i];
  return dx;
}

void SqueezeExcite::init_params(ParamMap& params, Rng& rng) const { gate_.init_params(params, rng); }

std::vector<std::string> SqueezeExcite::trainable_params() const {
  return gate_.trainable_params();
}

nlohmann::json SqueezeExcite::config() const {
  return {{"type", type()}, {"name", name()}, {"channels", channels_}, {"reduced", reduced_}};
}

// ---------------------------------------------------------------------------
// MBConv

namespace {

std::vector<LayerPtr> mbconv_body(const std::string& name, const MBConv::Options& o) {
  std::vector<LayerPtr> body;
  int mid = o.in_channels;
  if (o.expand_ratio != 1.0) {
    mid = static_cast<int>(std::lround(o.in_channels * o.expand_ratio));
    body.push_back(std::make_shared<Conv2d>(name + ".expand_conv", o.in_channels, mid, 1, 1, false));
    body.push_back(std::make_shared<BatchNorm>(name + ".expand_bn", mid));
    body.push_back(std::make_shared<Swish>(name + ".expand_act"));
  }
  body.push_back(std::make_shared<DepthwiseConv2d>(name + ".dw_conv", mid, o.kernel, o.stride));
  body.push_back(std::make_shared<BatchNorm>(name + ".dw_bn", mid));
  body.push_back(std::make_shared<Swish>(name + ".dw_act"));
  if (o.se_ratio > 0) {
    const int reduced = std::max(1, static_cast<int>(o.in_channels * o.se_ratio));
    body.push_back(std::make_shared<SqueezeExcite>(name + ".se", mid, reduced));
  }
  body.push_back(std::make_shared<Conv2d>(name + ".project_conv", mid, o.out_channels, 1, 1, false));
  body.push_back(std::make_shared<BatchNorm>(name + ".project_bn", o.out_channels));
  return body;
}

}  // namespace

MBConv::MBConv(std::string name, Options options)
    : Layer(name), options_(options), residual_(options.kind == 3), body_(name, mbconv_body(name, options)) {
  if (options_.kind < 1 || options_.kind > 3) {
    throw Error(ErrorCode::ShapeMismatch, name + ": unknown sub-block kind");
  }
  if (residual_ && (options_.stride != 1 || options_.in_channels != options_.out_channels)) {
    throw Error(ErrorCode::ShapeMismatch,
                name + ": repeat sub-block needs stride 1 and equal channel counts");
  }
}

Shape MBConv::output_shape(const Shape& in) const { return body_.output_shape(in); }

Tensor MBConv::forward(const Tensor& x, const ParamMap& params, Tape* tape) const {
  Tensor y = body_.forward(x, params, tape);
  if (residual_) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  }
  return y;
}

Tensor MBConv::backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                        ParamMap& grads) const {
  Tensor dx = body_.backward(grad_out, params, tape, grads);
  if (residual_) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += grad_out[i];
  }
  return dx;
}

void MBConv::init_params(ParamMap& params, Rng& rng) const { body_.init_params(params, rng); }

std::vector<std::string> MBConv::trainable_params() const { return body_.trainable_params(); }

nlohmann::json MBConv::config() const {
  return {{"type", type()},
          {"name", name()},
          {"in", options_.in_channels},
          {"out", options_.out_channels},
          {"kernel", options_.kernel},
          {"stride", options_.stride},
          {"expand_ratio", options_.expand_ratio},
          {"se_ratio", options_.se_ratio},
          {"kind", options_.kind}};
}

int MBConv::layer_count() const { return body_.layer_count() + (residual_ ? 1 : 0); }

// ---------------------------------------------------------------------------

LayerPtr layer_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  const auto name = j.at("name").get<std::string>();
  if (type == "conv2d") {
    return std::make_shared<Conv2d>(name, j.at("in"), j.at("out"), j.at("kernel"), j.at("stride"),
                                    j.at("bias"));
  }
  if (type == "depthwise_conv2d") {
    return std::make_shared<DepthwiseConv2d>(name, j.at("channels"), j.at("kernel"), j.at("stride"));
  }
  if (type == "batch_norm") return std::make_shared<BatchNorm>(name, j.at("channels"));
  if (type == "swish") return std::make_shared<Swish>(name);
  if (type == "sigmoid") return std::make_shared<Sigmoid>(name);
  if (type == "global_avg_pool") return std::make_shared<GlobalAvgPool>(name);
  if (type == "dense") return std::make_shared<Dense>(name, j.at("in"), j.at("out"));
  if (type == "squeeze_excite") {
    return std::make_shared<SqueezeExcite>(name, j.at("channels"), j.at("reduced"));
  }
  if (type == "mbconv") {
    MBConv::Options o;
    o.in_channels = j.at("in");
    o.out_channels = j.at("out");
    o.kernel = j.at("kernel");
    o.stride = j.at("stride");
    o.expand_ratio = j.at("expand_ratio");
    o.se_ratio = j.at("se_ratio");
    o.kind = j.at("kind");
    return std::make_shared<MBConv>(name, o);
  }
  if (type == "sequential") {
    std::vector<LayerPtr> kids;
    for (const auto& child : j.at("children")) kids.push_back(layer_from_json(child));
    return std::make_shared<Sequential>(name, std::move(kids));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown layer type '" + type + "'");
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "softmax expects (N, K)");
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  Tensor out(logits.shape());
  for (int r = 0; r < n; ++r) {
    const float* row = logits.data() + static_cast<std::size_t>(r) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(row[c] - mx);
    for (int c = 0; c < k; ++c) {
      out[static_cast<std::size_t>(r) * k + c] = static_cast<float>(std::exp(row[c] - mx) / z);
    }
  }
  return out;
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             Tensor* grad_logits) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "logits/labels mismatch");
  }
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  if (grad_logits) *grad_logits = Tensor(logits.shape());
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const int label = labels[r];
    if (label < 0 || label >= k) throw Error(ErrorCode::UnknownLabel, "label out of range");
    const float* row = logits.data() + static_cast<std::size_t>(r) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(row[c] - mx);
    const double log_z = std::log(z) + mx;
    loss += log_z - row[label];
    if (grad_logits) {
      for (int c = 0; c < k; ++c) {
        const double p = std::exp(row[c] - log_z);
        (*grad_logits)[static_cast<std::size_t>(r) * k + c] =
            static_cast<float>((p - (c == label ? 1.0 : 0.0)) / n);
      }
    }
  }
  return loss / n;
}

}  // namespace histo::nn
