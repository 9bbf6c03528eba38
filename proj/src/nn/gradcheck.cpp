#include "lspc/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lspc/nn/expectile.hpp"
#include "lspc/nn/gaussian.hpp"

namespace lspc::nn {

void GradCheckReport::merge(const GradCheckReport& o) {
  if (o.max_rel_error > max_rel_error || worst.empty()) {
    max_rel_error = std::max(max_rel_error, o.max_rel_error);
    worst = o.worst;
  }
  checked += o.checked;
  skipped_points += o.skipped_points;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double central_difference(double& p, const std::function<double()>& loss, double h) {
  const double saved = p;
  p = saved + h;
  const double up = loss();
  p = saved - h;
  const double down = loss();
  p = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

GradCheckReport compare_gradients(Mlp<double>& net, const GradientBuffer<double>& analytic,
                                  const std::function<double()>& loss, const std::string& name,
                                  double h) {
  GradCheckReport report;
  auto check = [&](double& p, double a, const std::string& where) {
    double err = relative_error(a, central_difference(p, loss, h));
    for (double hh : {h * 0.1, h * 0.01}) {
      if (err < 1e-5) break;
      err = std::min(err, relative_error(a, central_difference(p, loss, hh)));
    }
    ++report.checked;
    if (err > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      report.worst = where;
    }
  };
  auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k].weight;
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        check(w(r, c), analytic.layers[k].weight(r, c),
              name + ".L" + std::to_string(k) + ".w[" + std::to_string(r) + "," +
                  std::to_string(c) + "]");
    auto& b = layers[k].bias;
    for (Eigen::Index r = 0; r < b.size(); ++r)
      check(b(r), analytic.layers[k].bias(r),
            name + ".L" + std::to_string(k) + ".b[" + std::to_string(r) + "]");
  }
  return report;
}

GradCheckReport grad_check(const Mlp<double>& net_in, LossKind kind, std::uint64_t seed, int batch,
                           double pin_fraction) {
  Mlp<double> net = net_in;
  Rng rng(seed);
  const int in = net.input_dim();
  const int out = net.output_dim();
  MatD x(in, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  MatD target(out, batch);
  for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = rng.normal();

  const bool gaussian = net.head() == Head::kGaussian;
  if ((kind == LossKind::kGaussianNll || kind == LossKind::kKlStandardNormal) && !gaussian)
    throw UsageError("grad_check: loss kind requires a gaussian head");

  GradCheckReport skipped;
  if (kind == LossKind::kExpectile) {
    // Pin some targets onto the kink, then drop every point near it.
    MatD y = net.forward(x);
    const int pinned = static_cast<int>(std::lround(pin_fraction * batch));
    for (int j = 0; j < pinned; ++j) target.col(j) = y.topRows(out).col(j);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < batch; ++j) {
      const bool near_kink =
          ((target.col(j) - y.topRows(out).col(j)).array().abs() <= kKinkMargin).any();
      if (near_kink)
        ++skipped.skipped_points;
      else
        keep.push_back(j);
    }
    MatD xk(in, static_cast<Eigen::Index>(keep.size()));
    MatD tk(out, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      xk.col(static_cast<Eigen::Index>(j)) = x.col(keep[j]);
      tk.col(static_cast<Eigen::Index>(j)) = target.col(keep[j]);
    }
    x = xk;
    target = tk;
  }
  const double inv_b = x.cols() > 0 ? 1.0 / static_cast<double>(x.cols()) : 0.0;

  // Returns the loss and fills d loss / d head output.
  auto evaluate = [&](const MatD& y, MatD* dy) -> double {
    if (dy) *dy = MatD::Zero(y.rows(), y.cols());
    double loss = 0.0;
    switch (kind) {
      case LossKind::kZero:
        break;
      case LossKind::kMse: {
        const MatD d = y.topRows(out) - target;
        loss = d.squaredNorm() * inv_b;
        if (dy) dy->topRows(out) = 2.0 * d * inv_b;
        break;
      }
      case LossKind::kExpectile: {
        const double xi = 0.7;
        for (Eigen::Index j = 0; j < y.cols(); ++j)
          for (int d = 0; d < out; ++d) {
            const double u = target(d, j) - y(d, j);
            loss += expectile_loss(u, xi) * inv_b;
            if (dy) (*dy)(d, j) = -expectile_grad(u, xi) * inv_b;
          }
        break;
      }
      case LossKind::kGaussianNll: {
        const MatD mean = y.topRows(out);
        const MatD ls = y.bottomRows(out);
        loss = -batch_log_prob<double>(mean, ls, target).sum() * inv_b;
        if (dy) {
          const MatD inv_var = (-2.0 * ls.array()).exp().matrix();
          const MatD diff = target - mean;
          dy->topRows(out) = -(diff.cwiseProduct(inv_var)) * inv_b;
          dy->bottomRows(out) =
              -((diff.array().square() * inv_var.array()) - 1.0).matrix() * inv_b;
        }
        break;
      }
      case LossKind::kKlStandardNormal: {
        const MatD mean = y.topRows(out);
        const MatD ls = y.bottomRows(out);
        loss = batch_kl_to_standard_normal<double>(mean, ls).sum() * inv_b;
        if (dy) {
          dy->topRows(out) = mean * inv_b;
          dy->bottomRows(out) = ((2.0 * ls.array()).exp() - 1.0).matrix() * inv_b;
        }
        break;
      }
    }
    return loss;
  };

  ForwardCache<double> cache;
  const MatD y = net.forward(x, &cache);
  MatD dy;
  evaluate(y, &dy);
  auto grads = net.zero_grad();
  net.backward(cache, dy, &grads);

  if (kind == LossKind::kZero) {
    GradCheckReport r;
    r.checked = net.parameter_count();
    r.max_rel_error = grads.max_abs();  // identically zero
    r.worst = "zero-loss";
    return r;
  }
  GradCheckReport report = compare_gradients(
      net, grads, [&] { return evaluate(net.forward(x), nullptr); }, "net");
  report.skipped_points = skipped.skipped_points;
  return report;
}

}  // namespace lspc::nn
