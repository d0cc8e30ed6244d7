#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bipembed/eval.hpp"
#include "bipembed/pipeline.hpp"

namespace bipembed {

struct RunConfig {
    std::string command;

    std::string edges;
    std::string ratings;
    std::string out;
    std::string split;
    std::vector<std::string> embeddings;
    std::string loss_trace;
    std::string checkpoint;
    std::string config_file;

    std::string method = "fobe";
    std::vector<std::string> methods{"fobe", "hobe"};

    std::size_t dimension = 100;        // r
    std::size_t samples_per_node = 200; // s_r
    std::size_t gamma_size = 5;         // s_gamma
    double negative_ratio = 1.0;        // nu
    std::size_t trials = 10;            // R
    std::size_t iterations = 20;        // K
    double damping = 0.5;               // lambda
    std::size_t combined_dim = 100;     // k'
    double dropout = 0.5;
    std::size_t epochs = 10;
    double learning_rate = 0.1;
    double combiner_lr = 0.01;
    std::size_t batch_size = 256;
    std::string khop = "walk";
    bool printed_kl = false;

    std::vector<double> holdouts{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<std::uint64_t> seeds{0};
    double svm_c = 1.0;
    double svm_gamma = 0.1;
    std::size_t mlp_epochs = 30;
    double mlp_lr = 0.01;

    bool log_scale = false;
    std::size_t min_degree = 0;
    std::size_t k = 10;
    double rec_holdout = 0.4;
    std::string gain = "linear";

    std::vector<std::size_t> sweep_grid{2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    std::size_t sweep_trials = 10;
    double sweep_holdout = 0.5;

    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Every range or path violation, one message each; empty when valid.
std::vector<std::string> validate_config(const RunConfig& config);

PipelineConfig pipeline_config(const RunConfig& config);
LinkEvalParams link_params(const RunConfig& config);

/// Parses argv and runs the named stage. Returns 0 on success, 1 on a
/// component error, 2 on a usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bipembed
