#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uqlab/autodiff.hpp"
#include "uqlab/optim.hpp"
#include "uqlab/tensor.hpp"

namespace uqlab {

struct NetworkSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden = {20, 20};
    std::size_t output_dim = 2;  // class count, or embedding width
    double dropout_rate = 0.0;   // after each hidden activation when > 0

    void validate() const;
    std::size_t param_count() const;
};

/// Feed-forward relu network; the shared backbone for every model here.
class Mlp {
public:
    Mlp() = default;
    Mlp(NetworkSpec spec, Rng& rng);  // He-normal initialization

    const NetworkSpec& spec() const { return spec_; }
    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    std::vector<std::string> param_names() const;
    std::size_t param_count() const;

    struct TapeForward {
        Var logits;
        std::vector<Var> param_vars;  // aligned with params()
    };

    /// Records a forward pass on the tape. When `train_mode` and the spec
    /// has a dropout rate, dropout is applied after each hidden activation
    /// using `dropout_rng` (required in that case).
    TapeForward forward(Tape& tape, Var input, bool train_mode = false,
                        Rng* dropout_rng = nullptr) const;
    TapeForward forward(Tape& tape, const Tensor& x, bool train_mode = false,
                        Rng* dropout_rng = nullptr) const;
    /// Same pass but reusing parameter leaves already on the tape, so
    /// several forwards can share one gradient accumulation.
    Var forward_with(Tape& tape, Var input, const std::vector<Var>& param_vars,
                     bool train_mode = false, Rng* dropout_rng = nullptr) const;

    /// Tape-free inference; dropout is ignored.
    Tensor logits_plain(const Tensor& x) const;
    /// Tape-free inference with dropout masks active (MC Dropout style).
    Tensor logits_dropout(const Tensor& x, Rng& rng) const;

    std::vector<double> flatten() const;
    void set_flat(std::span<const double> w);

private:
    NetworkSpec spec_;
    std::vector<Tensor> params_;  // W0, b0, W1, b1, ...
};

Tensor one_hot(const std::vector<int>& labels, std::size_t classes);
Tensor softmax_plain(const Tensor& logits);
std::vector<int> argmax_rows(const Tensor& m);
double accuracy(const Tensor& probs, const std::vector<int>& labels);

enum class Reduction { Mean, Sum };

/// -sum_n log p(y_n) with the chosen reduction; labels become a one-hot
/// constant on the tape.
Var cross_entropy_loss(Tape& tape, Var logits, const std::vector<int>& labels,
                       Reduction reduction = Reduction::Mean);

struct TrainOptions {
    OptimizerConfig opt;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    int early_stop_patience = 0;  // epochs without train-loss improvement; 0 = off
};

struct TrainResult {
    double final_loss = 0.0;
    std::size_t epochs_run = 0;
};

/// Minibatch cross-entropy training. Throws RuntimeFailure on divergent
/// (non-finite) loss.
TrainResult train_classifier(Mlp& net, const Tensor& x, const std::vector<int>& labels,
                             const TrainOptions& options);

} // namespace uqlab
