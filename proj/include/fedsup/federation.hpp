#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fedsup/data.hpp"
#include "fedsup/metrics.hpp"
#include "fedsup/nn.hpp"
#include "fedsup/rng.hpp"
#include "fedsup/uncertainty.hpp"

// The federated state machines: per-round edge updates fed by uncertainty-
// filtered client uploads, the cloud round loop, uncertainty-weighted
// aggregation, and the plain-FedAVG / centralized / standalone baselines.
namespace fedsup {

enum class AggregatorKind { uwaa, fedavg };

struct FederationConfig {
    int edges = 10;              // K
    int clients = 50;            // N
    double participation = 0.3;  // C, fraction of edges per round
    int local_epochs = 5;        // E
    float eta = 0.01f;
    int passes = 3;              // M, forwarded to clients
    double epsilon = 0.025;      // upload threshold, forwarded to clients
    int max_rounds = 200;        // T
    int batch_size = 32;
    AggregatorKind aggregator = AggregatorKind::uwaa;
    bool uwaa_literal = false;       // Eq.-style unnormalized weights
    bool persistent_buffers = true;  // keep edge buffers across rounds
    double target_accuracy = -1.0;   // stop early when reached; <0 disables
    int checkpoint_every = 0;        // rounds between checkpoint files; 0 off

    void validate() const;
};

struct ClientData {
    std::uint32_t client_id = 0;
    std::vector<int> indices;  // into the training dataset
};

struct BufferSample {
    std::uint64_t sample_id = 0;
    int dataset_index = -1;
    double alpha = 0.0;
};

struct EdgeState {
    int edge_id = 0;
    std::vector<ClientData> clients;
    // insertion-ordered training buffer, deduplicated by sample id
    std::vector<BufferSample> buffer;
    std::unordered_map<std::uint64_t, std::size_t> buffer_pos;
    ModelParams local_params;
    double alpha_e = 0.0;

    void absorb(const UploadDict& dict, const ClientData& client);
    void refresh_alpha();
};

// Round-robin client-to-edge assignment over a partition: client i joins
// edge i % K and owns part i.
std::vector<EdgeState> build_edges(const Partition& partition, int edge_count);

struct EdgeResult {
    bool skipped = true;  // empty buffer, excluded from aggregation
    ModelParams params;
    double alpha_e = 0.0;
    long long sample_count = 0;      // n_k
    long long uploaded_images = 0;   // uploads made this round
    std::vector<UncertaintyRecord> records;
};

// One Algorithm-2 step: adopt the cloud params, collect client uploads, run
// E epochs of mini-batch SGD over the buffer. root is the run-level stream;
// client/train substreams are derived from (round, client|edge id) so the
// result does not depend on scheduling.
EdgeResult edge_update(EdgeState& state, const ModelParams& cloud_params,
                       const NetworkSpec& spec, const FederationConfig& cfg,
                       const LabeledDataset& train, int round, const RngStream& root);

struct AggregateInput {
    const ModelParams* params = nullptr;
    double alpha = 0.0;       // ignored by fedavg
    double sample_count = 0;  // n_k
};

// Uncertainty-weighted aggregation: raw weight e^alpha_k * n_k / n,
// normalized to a convex combination (the literal flag keeps the raw
// weights unnormalized).
ModelParams uwaa_aggregate(const std::vector<AggregateInput>& results, bool literal = false);
// Size-weighted baseline: sum of (n_k / n) * params_k.
ModelParams fedavg_aggregate(const std::vector<AggregateInput>& results);

struct CloudState {
    int round = 0;
    ModelParams omega_c;
    std::vector<RoundMetrics> history;
};

// Full Algorithm-3 loop: initialize, then per round select ceil(C*K) edges
// without replacement, run edge updates from the same round-start params,
// aggregate the non-skipped results, evaluate, log, and stop at T rounds or
// at the target accuracy. checkpoint_sink, when set, receives the aggregated
// params after each round.
CloudState cloud_execute(const NetworkSpec& spec, const FederationConfig& cfg,
                         std::vector<EdgeState>& edges, const LabeledDataset& train,
                         const std::vector<Tensor>& eval_images,
                         const std::vector<int>& eval_labels, RngStream root,
                         RunLog* log,
                         const std::function<void(int, const ModelParams&)>& checkpoint_sink = {},
                         const ModelParams* initial_params = nullptr);

struct TrajectoryPoint {
    int round = 0;
    float accuracy = 0.0f;
};

// Mini-batch SGD over `order`-indexed samples organized as T rounds of E
// epochs, evaluating once per round. Shares the per-round stream derivation
// with the federation loop, so a single edge holding all data reproduces it.
std::vector<TrajectoryPoint> run_centralized_sgd(const NetworkSpec& spec,
                                                 const FederationConfig& cfg,
                                                 const LabeledDataset& train,
                                                 const std::vector<int>& order,
                                                 const std::vector<Tensor>& eval_images,
                                                 const std::vector<int>& eval_labels,
                                                 RngStream root,
                                                 ModelParams* final_params = nullptr,
                                                 const ModelParams* initial_params = nullptr);

// Independent per-edge SGD with no parameter exchange; edge k trains on the
// union of its clients' parts.
std::vector<std::vector<TrajectoryPoint>> run_standalone_sgd(
    const NetworkSpec& spec, const FederationConfig& cfg,
    const std::vector<EdgeState>& edges, const LabeledDataset& train,
    const std::vector<Tensor>& eval_images, const std::vector<int>& eval_labels,
    RngStream root);

// E epochs of shuffled mini-batch SGD; the building block behind the three
// training modes above.
ModelParams train_epochs(const NetworkSpec& spec, ModelParams params,
                         const LabeledDataset& train, const std::vector<int>& order,
                         int epochs, float eta, int batch_size, RngStream rng);

}  // namespace fedsup
