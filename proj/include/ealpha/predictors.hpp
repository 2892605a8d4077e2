#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ealpha/month.hpp"
#include "ealpha/parallel.hpp"

namespace ealpha {

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;  // one feature vector per observation

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_features() const { return names.size(); }
};

struct RidgeConfig {
  std::vector<double> penalty_grid;  // empty: 13 points log-spaced 1e-3 to 1e3
};

struct MlpConfig {
  std::vector<int> hidden{32};
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch = 64;
  std::string activation = "tanh";  // or "relu"
};

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 8;
  int min_leaf = 5;
  int features_per_split = 0;  // 0: ceil(p / 3)
};

struct TrainConfig {
  RidgeConfig ridge;
  MlpConfig mlp;
  ForestConfig forest;
};

struct RidgeModel {
  std::vector<double> beta;
  double intercept = 0.0;
  double lambda = 0.0;
};

struct MlpModel {
  std::vector<int> layer_sizes;  // input, hidden..., 1
  std::string activation = "tanh";
  std::vector<double> params;  // per layer: weights row-major, then biases

  std::size_t n_params() const { return params.size(); }
};

struct ForestNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct ForestTree {
  std::vector<ForestNode> nodes;
  std::vector<std::size_t> bootstrap;  // row indices the tree was grown on

  double predict(const std::vector<double>& row) const;
};

struct ForestModel {
  std::vector<ForestTree> trees;
};

enum class ModelKind { ridge, mlp, forest };

const char* model_kind_name(ModelKind kind);

struct TrainedModel {
  ModelKind kind = ModelKind::ridge;
  std::vector<std::string> feature_names;
  MonthIndex train_begin{0, 1};
  MonthIndex train_end{0, 1};
  std::variant<RidgeModel, MlpModel, ForestModel> impl;
};

/// Ridge with an unpenalized intercept; the penalty is picked from the grid
/// by generalized cross-validation. A zero grid point is dropped from the
/// competition when the design is singular.
TrainedModel train_ridge(const FeatureMatrix& x, const std::vector<double>& y,
                         const RidgeConfig& cfg = {});

/// Mini-batch gradient descent on mean squared error; same seed and data
/// give bit-identical parameters.
TrainedModel train_mlp(const FeatureMatrix& x, const std::vector<double>& y, const MlpConfig& cfg,
                       std::uint64_t seed);

/// Bootstrap-aggregated regression trees with variance-reduction splits and
/// a random feature subset per split.
TrainedModel train_forest(const FeatureMatrix& x, const std::vector<double>& y,
                          const ForestConfig& cfg, std::uint64_t seed,
                          ExecMode mode = ExecMode::parallel);

std::vector<double> predict(const TrainedModel& model, const FeatureMatrix& x);

/// Mean squared error of the network on the given rows.
double mlp_loss(const MlpModel& m, const FeatureMatrix& x, const std::vector<double>& y);

/// Analytic gradient of mlp_loss with respect to every packed parameter.
std::vector<double> mlp_gradient(const MlpModel& m, const FeatureMatrix& x,
                                 const std::vector<double>& y);

}  // namespace ealpha
