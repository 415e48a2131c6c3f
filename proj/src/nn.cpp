#include "edgetimer/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace edgetimer::nn {

namespace {

using CMap = Eigen::Map<const Matrix>;
using CVMap = Eigen::Map<const Vector>;
using MMap = Eigen::Map<Matrix>;
using MVMap = Eigen::Map<Vector>;

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

struct Offsets {
  std::size_t w_ih, w_hh, b_ih, b_hh, w_o, b_o, total;
};

Offsets offsets(int in, int hid, int out) {
  Offsets o{};
  const std::size_t g = 3 * static_cast<std::size_t>(hid);
  o.w_ih = 0;
  o.w_hh = o.w_ih + g * in;
  o.b_ih = o.w_hh + g * hid;
  o.b_hh = o.b_ih + g;
  o.w_o = o.b_hh + g;
  o.b_o = o.w_o + static_cast<std::size_t>(out) * hid;
  o.total = o.b_o + out;
  return o;
}

}  // namespace

struct RecurrentNet::Views {
  CMap w_ih, w_hh;
  CVMap b_ih, b_hh;
  CMap w_o;
  CVMap b_o;
};

RecurrentNet::RecurrentNet(int input_size, int hidden_size, int output_size)
    : in_(input_size), hid_(hidden_size), out_(output_size) {
  if (in_ <= 0 || hid_ <= 0 || out_ <= 0) throw std::invalid_argument("network sizes must be positive");
  params_.assign(offsets(in_, hid_, out_).total, 0.0);
}

RecurrentNet::Views RecurrentNet::views() const {
  const auto o = offsets(in_, hid_, out_);
  const double* p = params_.data();
  return Views{CMap(p + o.w_ih, 3 * hid_, in_), CMap(p + o.w_hh, 3 * hid_, hid_), CVMap(p + o.b_ih, 3 * hid_),
               CVMap(p + o.b_hh, 3 * hid_), CMap(p + o.w_o, out_, hid_),   CVMap(p + o.b_o, out_)};
}

void RecurrentNet::init(std::mt19937_64& rng, double head_scale) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hid_));
  std::uniform_real_distribution<double> u(-bound, bound);
  const auto o = offsets(in_, hid_, out_);
  for (std::size_t k = 0; k < o.w_o; ++k) params_[k] = u(rng);
  for (std::size_t k = o.w_o; k < o.total; ++k) params_[k] = head_scale * u(rng);
}

Vector RecurrentNet::step(const Vector& x, Vector& h) const {
  SequenceBatch b;
  b.inputs.push_back(x);
  b.h0 = h;
  Cache c;
  auto y = forward(b, &c);
  h = c.h.back().col(0);
  return y.back().col(0);
}

std::vector<Matrix> RecurrentNet::forward(const SequenceBatch& batch, Cache* cache) const {
  const auto v = views();
  const int H = hid_;
  const int B = batch.batch();
  std::vector<Matrix> outputs;
  outputs.reserve(batch.inputs.size());
  if (cache) *cache = Cache{};
  Matrix h = batch.h0;
  for (const Matrix& x : batch.inputs) {
    if (x.rows() != in_ || x.cols() != B) throw std::invalid_argument("input batch has the wrong shape");
    Matrix gi = v.w_ih * x;
    gi.colwise() += v.b_ih;
    Matrix gh = v.w_hh * h;
    gh.colwise() += v.b_hh;
    Matrix r = sigmoid(gi.topRows(H) + gh.topRows(H));
    Matrix z = sigmoid(gi.middleRows(H, H) + gh.middleRows(H, H));
    Matrix hn = gh.bottomRows(H);
    Matrix n = (gi.bottomRows(H) + r.cwiseProduct(hn)).array().tanh().matrix();
    Matrix h_new = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
    Matrix y = v.w_o * h_new;
    y.colwise() += v.b_o;
    outputs.push_back(std::move(y));
    if (cache) {
      cache->h_prev.push_back(h);
      cache->r.push_back(std::move(r));
      cache->z.push_back(std::move(z));
      cache->n.push_back(std::move(n));
      cache->hn.push_back(std::move(hn));
      cache->h.push_back(h_new);
    }
    h = std::move(h_new);
  }
  return outputs;
}

void RecurrentNet::backward(const SequenceBatch& batch, const Cache& cache, const std::vector<Matrix>& d_outputs,
                            std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has the wrong size");
  const auto v = views();
  const auto o = offsets(in_, hid_, out_);
  const int H = hid_;
  const int B = batch.batch();
  double* g = grad.data();
  MMap dw_ih(g + o.w_ih, 3 * H, in_);
  MMap dw_hh(g + o.w_hh, 3 * H, H);
  MVMap db_ih(g + o.b_ih, 3 * H);
  MVMap db_hh(g + o.b_hh, 3 * H);
  MMap dw_o(g + o.w_o, out_, H);
  MVMap db_o(g + o.b_o, out_);

  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dgi(3 * H, B), dgh(3 * H, B);
  for (int t = batch.steps() - 1; t >= 0; --t) {
    const Matrix& dy = d_outputs[t];
    dw_o.noalias() += dy * cache.h[t].transpose();
    db_o += dy.rowwise().sum();
    Matrix dh = v.w_o.transpose() * dy + dh_next;

    const Matrix& r = cache.r[t];
    const Matrix& z = cache.z[t];
    const Matrix& n = cache.n[t];
    const Matrix& hp = cache.h_prev[t];
    const Matrix& hn = cache.hn[t];

    const Matrix dz = dh.cwiseProduct(hp - n);
    const Matrix dn = dh.cwiseProduct((1.0 - z.array()).matrix());
    const Matrix dn_pre = dn.cwiseProduct((1.0 - n.array().square()).matrix());
    const Matrix dr = dn_pre.cwiseProduct(hn);
    const Matrix dr_pre = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
    const Matrix dz_pre = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));

    dgi.topRows(H) = dr_pre;
    dgi.middleRows(H, H) = dz_pre;
    dgi.bottomRows(H) = dn_pre;
    dgh.topRows(H) = dr_pre;
    dgh.middleRows(H, H) = dz_pre;
    dgh.bottomRows(H) = dn_pre.cwiseProduct(r);

    dw_ih.noalias() += dgi * batch.inputs[t].transpose();
    db_ih += dgi.rowwise().sum();
    dw_hh.noalias() += dgh * hp.transpose();
    db_hh += dgh.rowwise().sum();
    dh_next = dh.cwiseProduct(z) + v.w_hh.transpose() * dgh;
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
    v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

void ValueNorm::update(std::span<const double> values) {
  if (values.empty()) return;
  double mean = 0.0, sq = 0.0;
  for (double v : values) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(values.size());
  sq /= static_cast<double>(values.size());
  running_mean = beta_ * running_mean + (1.0 - beta_) * mean;
  running_sq = beta_ * running_sq + (1.0 - beta_) * sq;
  debias = beta_ * debias + (1.0 - beta_);
}

double ValueNorm::mean() const { return debias > 0.0 ? running_mean / debias : 0.0; }

double ValueNorm::variance() const {
  if (debias <= 0.0) return 1.0;
  const double m = mean();
  return std::max(min_var_, running_sq / debias - m * m);
}

double ValueNorm::normalize(double v) const { return (v - mean()) / std::sqrt(variance()); }

double ValueNorm::denormalize(double v) const { return v * std::sqrt(variance()) + mean(); }

}  // namespace edgetimer::nn
