#include "ealpha/predictors.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ealpha/errors.hpp"
#include "ealpha/rng.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ridge:
      return "ridge";
    case ModelKind::mlp:
      return "mlp";
    case ModelKind::forest:
      return "forest";
  }
  return "unknown";
}

namespace {

Eigen::MatrixXd to_matrix(const FeatureMatrix& x) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.n_rows());
  const Eigen::Index p = static_cast<Eigen::Index>(x.n_features());
  Eigen::MatrixXd m(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::vector<double>& row = x.rows[static_cast<std::size_t>(i)];
    if (row.size() != x.names.size())
      fail(ErrorCode::alignment, "feature row " + std::to_string(i) + " has wrong width");
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

std::vector<double> default_ridge_grid() {
  std::vector<double> grid;
  for (int g = 0; g < 13; ++g) grid.push_back(std::pow(10.0, -3.0 + 0.5 * g));
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  return grid;
}

}  // namespace

TrainedModel train_ridge(const FeatureMatrix& x, const std::vector<double>& y,
                         const RidgeConfig& cfg) {
  const std::size_t n = x.n_rows();
  const std::size_t p = x.n_features();
  if (n == 0 || y.size() != n) fail(ErrorCode::precondition, "ridge needs aligned non-empty data");
  if (p == 0) fail(ErrorCode::precondition, "ridge needs at least one feature");

  std::vector<double> grid = cfg.penalty_grid.empty() ? default_ridge_grid() : cfg.penalty_grid;
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  for (double l : grid)
    if (l < 0.0) fail(ErrorCode::config, "ridge penalties must be nonnegative");

  // Center both sides so the intercept stays unpenalized: solve in deviations
  // from column means, then fold the means back into the intercept.
  Eigen::MatrixXd xm = to_matrix(x);
  const Eigen::RowVectorXd col_means = xm.colwise().mean();
  xm.rowwise() -= col_means;
  const double y_mean = vec_mean(y);
  Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) yc[static_cast<Eigen::Index>(i)] = y[i] - y_mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(xm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd d = svd.singularValues();
  const Eigen::VectorXd c = svd.matrixU().transpose() * yc;
  const double d_max = d.size() > 0 ? d[0] : 0.0;
  const bool singular = d_max <= 0.0 || d[d.size() - 1] <= 1e-12 * d_max ||
                        static_cast<std::size_t>(d.size()) < p;

  const double y_sq = yc.squaredNorm();
  double c_sq = 0.0;
  for (Eigen::Index j = 0; j < c.size(); ++j) c_sq += c[j] * c[j];

  double best_gcv = std::numeric_limits<double>::infinity();
  double best_lambda = -1.0;
  bool any = false;
  for (double lambda : grid) {
    if (lambda == 0.0 && singular) continue;
    double rss = y_sq - c_sq;
    double tr_h = 1.0;  // the unpenalized intercept contributes one degree
    for (Eigen::Index j = 0; j < d.size(); ++j) {
      const double dj2 = d[j] * d[j];
      const double shrink = lambda == 0.0 ? 0.0 : lambda / (dj2 + lambda);
      rss += c[j] * c[j] * shrink * shrink;
      tr_h += dj2 / (dj2 + lambda);
    }
    const double dof = static_cast<double>(n) - tr_h;
    if (dof <= 1e-9) continue;
    const double gcv = static_cast<double>(n) * rss / (dof * dof);
    if (!any || gcv < best_gcv) {
      any = true;
      best_gcv = gcv;
      best_lambda = lambda;
    }
  }
  if (!any) fail(ErrorCode::degenerate, "no usable ridge penalty in the grid");

  Eigen::VectorXd shrink_c(d.size());
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const double dj2 = d[j] * d[j];
    shrink_c[j] = d[j] <= 1e-12 * d_max && best_lambda == 0.0
                      ? 0.0
                      : d[j] / (dj2 + best_lambda) * c[j];
  }
  const Eigen::VectorXd beta = svd.matrixV() * shrink_c;

  TrainedModel model;
  model.kind = ModelKind::ridge;
  model.feature_names = x.names;
  RidgeModel rm;
  rm.beta.assign(beta.data(), beta.data() + beta.size());
  rm.intercept = y_mean - col_means.dot(beta);
  rm.lambda = best_lambda;
  model.impl = std::move(rm);
  return model;
}

namespace {

struct LayerView {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w;
  Eigen::Map<const Eigen::VectorXd> b;
};

std::size_t mlp_param_count(const std::vector<int>& sizes) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    total += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l]) +
             static_cast<std::size_t>(sizes[l + 1]);
  return total;
}

LayerView layer_view(const std::vector<double>& params, const std::vector<int>& sizes,
                     std::size_t layer) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l)
    offset += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l]) +
              static_cast<std::size_t>(sizes[l + 1]);
  const int out = sizes[layer + 1];
  const int in = sizes[layer];
  return LayerView{
      {params.data() + offset, out, in},
      {params.data() + offset + static_cast<std::size_t>(out) * static_cast<std::size_t>(in), out}};
}

double activate(double z, bool relu) { return relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }
double activate_prime_from_a(double a, double z, bool relu) {
  return relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - a * a;
}

bool is_relu(const std::string& name) {
  if (name == "relu") return true;
  if (name == "tanh") return false;
  fail(ErrorCode::config, "unknown activation '" + name + "'");
}

struct MlpPass {
  std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
  std::vector<Eigen::MatrixXd> a;  // activations, a[0] is the input batch
};

MlpPass mlp_forward(const MlpModel& m, const Eigen::MatrixXd& input) {
  const bool relu = is_relu(m.activation);
  MlpPass pass;
  pass.a.push_back(input);
  const std::size_t n_layers = m.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerView lv = layer_view(m.params, m.layer_sizes, l);
    Eigen::MatrixXd z = pass.a.back() * lv.w.transpose();
    z.rowwise() += lv.b.transpose();
    if (l + 1 < n_layers) {
      Eigen::MatrixXd a = z.unaryExpr([relu](double v) { return activate(v, relu); });
      pass.z.push_back(std::move(z));
      pass.a.push_back(std::move(a));
    } else {
      pass.z.push_back(z);
      pass.a.push_back(std::move(z));
    }
  }
  return pass;
}

}  // namespace

double mlp_loss(const MlpModel& m, const FeatureMatrix& x, const std::vector<double>& y) {
  const Eigen::MatrixXd input = to_matrix(x);
  const MlpPass pass = mlp_forward(m, input);
  const Eigen::MatrixXd& out = pass.a.back();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double d = out(i, 0) - y[static_cast<std::size_t>(i)];
    acc += d * d;
  }
  return acc / static_cast<double>(out.rows());
}

std::vector<double> mlp_gradient(const MlpModel& m, const FeatureMatrix& x,
                                 const std::vector<double>& y) {
  const bool relu = is_relu(m.activation);
  const Eigen::MatrixXd input = to_matrix(x);
  const MlpPass pass = mlp_forward(m, input);
  const std::size_t n_layers = m.layer_sizes.size() - 1;
  const Eigen::Index batch = input.rows();

  std::vector<double> grad(m.params.size(), 0.0);
  Eigen::MatrixXd delta = pass.a.back();
  for (Eigen::Index i = 0; i < batch; ++i)
    delta(i, 0) = 2.0 * (delta(i, 0) - y[static_cast<std::size_t>(i)]) / static_cast<double>(batch);

  for (std::size_t l = n_layers; l-- > 0;) {
    const LayerView lv = layer_view(m.params, m.layer_sizes, l);
    const Eigen::MatrixXd grad_w = delta.transpose() * pass.a[l];
    const Eigen::VectorXd grad_b = delta.colwise().sum();

    std::size_t offset = 0;
    for (std::size_t k = 0; k < l; ++k)
      offset += static_cast<std::size_t>(m.layer_sizes[k + 1]) * static_cast<std::size_t>(m.layer_sizes[k]) +
                static_cast<std::size_t>(m.layer_sizes[k + 1]);
    for (Eigen::Index r = 0; r < grad_w.rows(); ++r)
      for (Eigen::Index cc = 0; cc < grad_w.cols(); ++cc)
        grad[offset + static_cast<std::size_t>(r * grad_w.cols() + cc)] = grad_w(r, cc);
    const std::size_t b_offset = offset + static_cast<std::size_t>(grad_w.rows() * grad_w.cols());
    for (Eigen::Index r = 0; r < grad_b.size(); ++r) grad[b_offset + static_cast<std::size_t>(r)] = grad_b[r];

    if (l > 0) {
      Eigen::MatrixXd next = delta * lv.w;
      const Eigen::MatrixXd& a_prev = pass.a[l];
      const Eigen::MatrixXd& z_prev = pass.z[l - 1];
      for (Eigen::Index i = 0; i < next.rows(); ++i)
        for (Eigen::Index j = 0; j < next.cols(); ++j)
          next(i, j) *= activate_prime_from_a(a_prev(i, j), z_prev(i, j), relu);
      delta = std::move(next);
    }
  }
  return grad;
}

TrainedModel train_mlp(const FeatureMatrix& x, const std::vector<double>& y, const MlpConfig& cfg,
                       std::uint64_t seed) {
  const std::size_t n = x.n_rows();
  if (n == 0 || y.size() != n) fail(ErrorCode::precondition, "mlp needs aligned non-empty data");
  if (cfg.batch < 1 || cfg.epochs < 0 || cfg.learning_rate <= 0.0)
    fail(ErrorCode::config, "mlp config needs positive batch and learning rate");
  if (n < static_cast<std::size_t>(cfg.batch))
    fail(ErrorCode::precondition, "mlp needs at least one full batch of rows");
  for (int h : cfg.hidden)
    if (h < 1) fail(ErrorCode::config, "mlp hidden sizes must be positive");

  MlpModel m;
  m.activation = cfg.activation;
  is_relu(cfg.activation);
  m.layer_sizes.push_back(static_cast<int>(x.n_features()));
  for (int h : cfg.hidden) m.layer_sizes.push_back(h);
  m.layer_sizes.push_back(1);
  m.params.assign(mlp_param_count(m.layer_sizes), 0.0);

  // Symmetric uniform weights scaled by fan-in; biases start at zero.
  Rng init_rng(derive_seed(seed, 1));
  {
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      const int out = m.layer_sizes[l + 1];
      const int in = m.layer_sizes[l];
      const double scale = 1.0 / std::sqrt(static_cast<double>(in));
      for (int k = 0; k < out * in; ++k)
        m.params[offset + static_cast<std::size_t>(k)] = (2.0 * init_rng.uniform() - 1.0) * scale;
      offset += static_cast<std::size_t>(out) * static_cast<std::size_t>(in) + static_cast<std::size_t>(out);
    }
  }

  Rng shuffle_rng(derive_seed(seed, 2));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch));
      FeatureMatrix bx;
      bx.names = x.names;
      std::vector<double> by;
      for (std::size_t i = start; i < stop; ++i) {
        bx.rows.push_back(x.rows[order[i]]);
        by.push_back(y[order[i]]);
      }
      const std::vector<double> grad = mlp_gradient(m, bx, by);
      for (std::size_t k = 0; k < grad.size(); ++k) m.params[k] -= cfg.learning_rate * grad[k];
      epoch_loss += mlp_loss(m, bx, by);
      ++batches;
    }
    if (!std::isfinite(epoch_loss / static_cast<double>(batches)))
      fail(ErrorCode::divergence, "mlp training diverged at epoch " + std::to_string(epoch + 1));
  }

  TrainedModel model;
  model.kind = ModelKind::mlp;
  model.feature_names = x.names;
  model.impl = std::move(m);
  return model;
}

double ForestTree::predict(const std::vector<double>& row) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].leaf) {
    const ForestNode& nd = nodes[static_cast<std::size_t>(node)];
    node = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<double>& y;
  const ForestConfig& cfg;
  int mtry;
  Rng rng;
  ForestTree tree;

  double node_mean(const std::vector<std::size_t>& rows) const {
    double acc = 0.0;
    for (std::size_t i : rows) acc += y[i];
    return acc / static_cast<double>(rows.size());
  }

  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double sse = std::numeric_limits<double>::infinity();
  };

  Split best_split(const std::vector<std::size_t>& rows, const std::vector<int>& features) const {
    Split best;
    const std::size_t n = rows.size();
    std::vector<std::pair<double, double>> vals(n);  // feature value, target
    for (int f : features) {
      for (std::size_t i = 0; i < n; ++i)
        vals[i] = {x(static_cast<Eigen::Index>(rows[i]), f), y[rows[i]]};
      std::sort(vals.begin(), vals.end());

      double right_sum = 0.0, right_sq = 0.0;
      for (const auto& [v, t] : vals) {
        right_sum += t;
        right_sq += t * t;
      }
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += vals[i].second;
        left_sq += vals[i].second * vals[i].second;
        right_sum -= vals[i].second;
        right_sq -= vals[i].second * vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(cfg.min_leaf) || nr < static_cast<std::size_t>(cfg.min_leaf))
          continue;
        const double sse_l = left_sq - left_sum * left_sum / static_cast<double>(nl);
        const double sse_r = right_sq - right_sum * right_sum / static_cast<double>(nr);
        const double sse = sse_l + sse_r;
        // Features ascend and thresholds ascend, so strict improvement means
        // ties go to the lower feature index, then the lower threshold.
        if (sse < best.sse) {
          best.found = true;
          best.feature = f;
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
          best.sse = sse;
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().value = node_mean(rows);

    if (depth >= cfg.max_depth || rows.size() < 2 * static_cast<std::size_t>(cfg.min_leaf))
      return index;
    bool constant = true;
    for (std::size_t i = 1; i < rows.size() && constant; ++i)
      if (y[rows[i]] != y[rows[0]]) constant = false;
    if (constant) return index;

    // Random feature subset, sampled without replacement, searched in
    // ascending index order.
    std::vector<int> all(static_cast<std::size_t>(x.cols()));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> chosen;
    for (int k = 0; k < mtry; ++k) {
      const std::size_t pick = static_cast<std::size_t>(k) + rng.below(all.size() - static_cast<std::size_t>(k));
      std::swap(all[static_cast<std::size_t>(k)], all[pick]);
      chosen.push_back(all[static_cast<std::size_t>(k)]);
    }
    std::sort(chosen.begin(), chosen.end());

    const Split split = best_split(rows, chosen);
    if (!split.found) return index;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows) {
      if (x(static_cast<Eigen::Index>(i), split.feature) <= split.threshold)
        left_rows.push_back(i);
      else
        right_rows.push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left = build(std::move(left_rows), depth + 1);
    const int right = build(std::move(right_rows), depth + 1);
    ForestNode& node = tree.nodes[static_cast<std::size_t>(index)];
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }
};

}  // namespace

TrainedModel train_forest(const FeatureMatrix& x, const std::vector<double>& y,
                          const ForestConfig& cfg, std::uint64_t seed, ExecMode mode) {
  const std::size_t n = x.n_rows();
  if (n < 2 || y.size() != n) fail(ErrorCode::precondition, "forest needs at least 2 aligned rows");
  if (cfg.n_trees < 1 || cfg.max_depth < 1 || cfg.min_leaf < 1)
    fail(ErrorCode::config, "forest counts must be positive");
  const int p = static_cast<int>(x.n_features());
  if (p < 1) fail(ErrorCode::precondition, "forest needs at least one feature");
  int mtry = cfg.features_per_split > 0 ? cfg.features_per_split : (p + 2) / 3;
  mtry = std::min(mtry, p);

  const Eigen::MatrixXd xm = to_matrix(x);
  ForestModel fm;
  fm.trees.resize(static_cast<std::size_t>(cfg.n_trees));

  run_for(mode, static_cast<std::size_t>(cfg.n_trees), [&](std::size_t t) {
    Rng tree_rng(derive_seed(seed, t));
    std::vector<std::size_t> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sample.push_back(tree_rng.below(n));

    TreeBuilder builder{xm, y, cfg, mtry, std::move(tree_rng), ForestTree{}};
    builder.tree.bootstrap = sample;
    builder.build(std::move(sample), 0);
    fm.trees[t] = std::move(builder.tree);
  });

  TrainedModel model;
  model.kind = ModelKind::forest;
  model.feature_names = x.names;
  model.impl = std::move(fm);
  return model;
}

namespace {

void check_features(const TrainedModel& model, const FeatureMatrix& x) {
  if (model.feature_names == x.names) return;
  std::string detail;
  const std::size_t common = std::min(model.feature_names.size(), x.names.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (model.feature_names[i] != x.names[i])
      detail += " expected '" + model.feature_names[i] + "' got '" + x.names[i] + "' at position " +
                std::to_string(i) + ";";
  }
  for (std::size_t i = common; i < model.feature_names.size(); ++i)
    detail += " missing '" + model.feature_names[i] + "';";
  for (std::size_t i = common; i < x.names.size(); ++i) detail += " unexpected '" + x.names[i] + "';";
  fail(ErrorCode::alignment, "feature mismatch:" + detail);
}

}  // namespace

std::vector<double> predict(const TrainedModel& model, const FeatureMatrix& x) {
  check_features(model, x);
  std::vector<double> out;
  out.reserve(x.n_rows());
  if (model.kind == ModelKind::ridge) {
    const RidgeModel& rm = std::get<RidgeModel>(model.impl);
    for (const std::vector<double>& row : x.rows) {
      double v = rm.intercept;
      for (std::size_t j = 0; j < rm.beta.size(); ++j) v += rm.beta[j] * row[j];
      out.push_back(v);
    }
  } else if (model.kind == ModelKind::mlp) {
    const MlpModel& m = std::get<MlpModel>(model.impl);
    const MlpPass pass = mlp_forward(m, to_matrix(x));
    const Eigen::MatrixXd& last = pass.a.back();
    for (Eigen::Index i = 0; i < last.rows(); ++i) out.push_back(last(i, 0));
  } else {
    const ForestModel& fm = std::get<ForestModel>(model.impl);
    for (const std::vector<double>& row : x.rows) {
      double acc = 0.0;
      for (const ForestTree& tree : fm.trees) acc += tree.predict(row);
      out.push_back(acc / static_cast<double>(fm.trees.size()));
    }
  }
  for (double v : out)
    if (!std::isfinite(v)) fail(ErrorCode::range, "prediction is not finite");
  return out;
}

}  // namespace ealpha
