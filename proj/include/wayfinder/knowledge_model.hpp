#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wayfinder/provider.hpp"

namespace wayfinder {

// 5 concatenated embeddings: demo observation, demo plan, demo action,
// current observation, current plan.
constexpr size_t kModelInputDim = 5 * kEmbeddingDim;  // 7680
constexpr size_t kModelHiddenDim = 200;

// Three dense layers, ReLU between the hidden ones, sigmoid on the scalar
// output. Weights are row-major [in][out]. 64-bit floats throughout.
struct RerankerParams {
    std::vector<double> w1, b1;  // 7680x200, 200
    std::vector<double> w2, b2;  // 200x200, 200
    std::vector<double> w3;      // 200
    double b3 = 0.0;

    static RerankerParams zeros();
    // He-uniform: limit = sqrt(6 / fan_in), seeded; biases zero. Identical
    // bits for identical seeds.
    static RerankerParams he_uniform(uint64_t seed);

    bool bitwise_equal(const RerankerParams& o) const;
    size_t parameter_count() const;
};

// Output clamped into the open interval (0,1); reachable z values never hit
// the clamp in practice.
double km_forward(const RerankerParams& p, const double* x);
double km_forward(const RerankerParams& p, const std::vector<double>& x);

// Mean binary cross-entropy; log arguments clamped at 1e-12.
double bce_loss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels);

struct Dataset {
    size_t count = 0;
    std::vector<double> inputs;  // count * kModelInputDim, row-major
    std::vector<uint8_t> labels;

    void add(const double* x, uint8_t y);
    const double* row(size_t i) const { return inputs.data() + i * kModelInputDim; }
    void reserve(size_t n);
};

struct TrainConfig {
    int epochs = 8;
    int batch_size = 32;
    double learning_rate = 0.001;
    uint64_t seed = 0;
};

struct EpochMetrics {
    double loss = 0.0;      // mean BCE across the epoch's examples
    double accuracy = 0.0;  // 0.5-threshold train accuracy
};

struct TrainResult {
    RerankerParams params;
    std::vector<EpochMetrics> epochs;
};

// Plain mini-batch SGD, seeded shuffle each epoch, exactly config.epochs
// passes. Single-threaded; same seed and data give bitwise-identical params.
TrainResult train(const Dataset& data, const TrainConfig& config);

struct EvalMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;  // positive class; 0 when undefined
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

EvalMetrics evaluate(const RerankerParams& p, const Dataset& data);

struct GradCheckReport {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped = 0;  // coords where both analytic and numeric are ~0
};

// Central finite differences against the analytic gradient of the mean batch
// loss. Samples up to coords_per_tensor coordinates per tensor (all when the
// tensor is smaller). Relative error |a-n| / max(|a|,|n|); coordinates where
// both sides are below 1e-10 are skipped (dead ReLU paths).
GradCheckReport gradient_check(const RerankerParams& p, const Dataset& batch, uint64_t seed,
                               double h = 1e-5, int coords_per_tensor = 100);

// Binary container: magic, version, shape header, train config, metrics
// JSON, raw little-endian doubles.
void save_model(const std::string& path, const RerankerParams& p, const TrainConfig& config,
                const std::string& metrics_json);

struct ModelFile {
    RerankerParams params;
    TrainConfig config;
    std::string metrics_json;
};

ModelFile load_model(const std::string& path);

// Seeded Fisher-Yates; mt19937_64's output sequence is pinned by the
// standard, so the permutation is stable across platforms.
void shuffle_indices(std::vector<size_t>& idx, uint64_t seed);

// 80/20 split used by train-km and the curriculum; seeded, deterministic.
void split_dataset(const Dataset& all, uint64_t seed, Dataset& train_out, Dataset& eval_out);

}  // namespace wayfinder
