#include "qdiag/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace qdiag {

void TrainConfig::validate() const {
    if (!(gamma_r > 0.0)) throw std::invalid_argument("gamma_r must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (batchnorm)");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

void TrainHistory::write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char line[160];
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", e + 1,
                      epochs[e].train_loss, epochs[e].train_acc, epochs[e].val_loss,
                      epochs[e].val_acc);
        os << line;
    }
}

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2 || logits.extent(0) != labels.size()) {
        throw std::invalid_argument("cross_entropy: logits " + shape_to_string(logits.shape()) +
                                    " vs " + std::to_string(labels.size()) + " labels");
    }
    if (!logits.all_finite()) throw std::invalid_argument("cross_entropy: non-finite logits");
    const std::size_t batch = logits.extent(0);
    const std::size_t classes = logits.extent(1);

    CrossEntropyResult res;
    res.dlogits = Tensor({batch, classes});
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(classes) + ")");
        }
        const double* row = logits.data() + b * classes;
        double max_logit = row[0];
        for (std::size_t c = 1; c < classes; ++c) max_logit = std::max(max_logit, row[c]);
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum_exp += std::exp(row[c] - max_logit);
        const double log_z = max_logit + std::log(sum_exp);
        total += log_z - row[label];
        double* drow = res.dlogits.data() + b * classes;
        for (std::size_t c = 0; c < classes; ++c) {
            const double softmax = std::exp(row[c] - log_z);
            drow[c] = (softmax - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) /
                      static_cast<double>(batch);
        }
    }
    res.loss = total / static_cast<double>(batch);
    return res;
}

void sgd_step(const std::vector<Parameter*>& params, double gamma_r, double alpha) {
    for (Parameter* p : params) {
        const double lr = p->lr_group() == LrGroup::kRGroup ? gamma_r : alpha * gamma_r;
        double* v = p->value.data();
        const double* g = p->grad.data();
        for (std::size_t i = 0; i < p->value.numel(); ++i) v[i] -= lr * g[i];
        p->zero_grad();
    }
}

namespace {

Tensor gather_batch(const Dataset& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, std::vector<int>& labels_out) {
    const std::size_t bs = end - begin;
    Tensor batch({bs, 1, data.win_len});
    labels_out.resize(bs);
    for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t idx = order[begin + i];
        const float* src = data.window(idx);
        double* dst = batch.data() + i * data.win_len;
        for (std::size_t k = 0; k < data.win_len; ++k) dst[k] = src[k];
        labels_out[i] = data.labels[idx];
    }
    return batch;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t classes = logits.extent(1);
    const double* p = logits.data() + row * classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
        if (p[c] > p[best]) best = c;
    }
    return best;
}

}  // namespace

std::pair<double, double> evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        Tensor batch = gather_batch(data, order, begin, end, labels);
        Tensor logits = model.forward(batch, Mode::kEval);
        CrossEntropyResult ce = cross_entropy(logits, labels);
        loss_sum += ce.loss * static_cast<double>(end - begin);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (argmax_row(logits, i) == static_cast<std::size_t>(labels[i])) ++correct;
        }
    }
    return {loss_sum / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

std::vector<int> predict(Model& model, const Dataset& data, std::size_t batch_size) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> preds(data.size());
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        Tensor batch = gather_batch(data, order, begin, end, labels);
        Tensor logits = model.forward(batch, Mode::kEval);
        for (std::size_t i = 0; i < end - begin; ++i) {
            preds[begin + i] = static_cast<int>(argmax_row(logits, i));
        }
    }
    return preds;
}

TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train: datasets must be non-empty");
    }
    if (train_set.win_len != model.spec().input_len) {
        throw std::invalid_argument("train: dataset window length " +
                                    std::to_string(train_set.win_len) +
                                    " does not match model input " +
                                    std::to_string(model.spec().input_len));
    }
    model.set_threads(config.threads);
    std::vector<Parameter*> params = model.parameters();

    Rng rng(Rng::derive_seed(config.seed, 0x7261));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    const auto t_start = std::chrono::steady_clock::now();
    std::vector<int> labels;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            if (end - begin < 2) break;  // batchnorm cannot normalize a single sample
            Tensor batch = gather_batch(train_set, order, begin, end, labels);
            Tensor logits = model.forward(batch, Mode::kTrain);
            CrossEntropyResult ce = cross_entropy(logits, labels);
            if (!std::isfinite(ce.loss) || ce.loss > 1e6) {
                throw std::runtime_error("training diverged at epoch " +
                                         std::to_string(epoch + 1) + ", batch " +
                                         std::to_string(batch_index + 1) + " (loss " +
                                         std::to_string(ce.loss) + ")");
            }
            loss_sum += ce.loss * static_cast<double>(end - begin);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (argmax_row(logits, i) == static_cast<std::size_t>(labels[i])) ++correct;
            }
            model.backward(ce.dlogits);
            sgd_step(params, config.gamma_r, config.alpha);
            seen += end - begin;
            ++batch_index;
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        std::tie(stats.val_loss, stats.val_acc) = evaluate(model, val_set);
        history.epochs.push_back(stats);
    }
    history.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return history;
}

const std::vector<double>& default_gamma_r_grid() {
    static const std::vector<double> grid{0.1, 0.3, 0.5, 0.8, 0.08, 0.05};
    return grid;
}

const std::vector<double>& default_alpha_grid() {
    static const std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    return grid;
}

GridPoint grid_search(const std::function<Model()>& model_builder, const Dataset& train_set,
                      const Dataset& val_set, const std::vector<double>& gamma_r_set,
                      const std::vector<double>& alpha_set, const TrainConfig& base_config,
                      std::vector<GridPoint>* all_points) {
    if (gamma_r_set.empty() || alpha_set.empty()) {
        throw std::invalid_argument("grid_search: grids must be non-empty");
    }
    bool have_best = false;
    GridPoint best;
    for (double gamma_r : gamma_r_set) {
        for (double alpha : alpha_set) {
            TrainConfig cfg = base_config;
            cfg.gamma_r = gamma_r;
            cfg.alpha = alpha;
            Model model = model_builder();
            GridPoint point{gamma_r, alpha, 0.0};
            try {
                TrainHistory hist = train(model, train_set, val_set, cfg);
                point.val_acc = hist.epochs.back().val_acc;
            } catch (const std::runtime_error&) {
                point.val_acc = 0.0;  // diverged; worst possible score
            }
            if (all_points) all_points->push_back(point);
            const bool better =
                !have_best || point.val_acc > best.val_acc ||
                (point.val_acc == best.val_acc &&
                 (point.gamma_r < best.gamma_r ||
                  (point.gamma_r == best.gamma_r && point.alpha < best.alpha)));
            if (better) {
                best = point;
                have_best = true;
            }
        }
    }
    return best;
}

}  // namespace qdiag
