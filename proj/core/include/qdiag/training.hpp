// Cross-entropy SGD training with the dual learning rate: the r-group trains
// at gamma_r, the quadratic groups at alpha * gamma_r. No momentum, decay or
// other tricks.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qdiag/network.hpp"
#include "qdiag/signals.hpp"
#include "qdiag/tensor.hpp"

namespace qdiag {

struct TrainConfig {
    double gamma_r = 0.1;
    double alpha = 1e-2;  // gamma_gb = alpha * gamma_r
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    bool shuffle = true;
    int threads = 1;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    double wall_seconds = 0.0;

    void write_csv(const std::string& path) const;  // epoch,train_loss,train_acc,val_loss,val_acc
};

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor dlogits;  // (softmax - onehot) / B
};

// Mean negative log-softmax of the true class, log-sum-exp stabilized.
CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// value <- value - lr * grad with lr = gamma_r (R group) or alpha * gamma_r
// (GB group); gradients are zeroed afterwards.
void sgd_step(const std::vector<Parameter*>& params, double gamma_r, double alpha);

// Epoch loop over seeded shuffled minibatches; the final short batch is kept.
// Aborts with the epoch/batch index when the loss diverges.
TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config);

// Mean loss and accuracy of a frozen model over a dataset (EVAL mode).
std::pair<double, double> evaluate(Model& model, const Dataset& data,
                                   std::size_t batch_size = 256);
std::vector<int> predict(Model& model, const Dataset& data, std::size_t batch_size = 256);

struct GridPoint {
    double gamma_r = 0.0;
    double alpha = 0.0;
    double val_acc = 0.0;
};

// The paper's search grids.
const std::vector<double>& default_gamma_r_grid();  // {0.1, 0.3, 0.5, 0.8, 0.08, 0.05}
const std::vector<double>& default_alpha_grid();    // {1e-1 ... 1e-5}

// Exhaustive product search by validation accuracy; ties break toward the
// smaller gamma_r, then the smaller alpha. model_builder must return a fresh
// initialized model for every call.
GridPoint grid_search(const std::function<Model()>& model_builder, const Dataset& train_set,
                      const Dataset& val_set, const std::vector<double>& gamma_r_set,
                      const std::vector<double>& alpha_set, const TrainConfig& base_config,
                      std::vector<GridPoint>* all_points = nullptr);

}  // namespace qdiag
