#include "fedsup/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedsup {

void FederationConfig::validate() const {
    if (edges < 1) throw std::invalid_argument("config: K must be >= 1");
    if (clients < 1) throw std::invalid_argument("config: N must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0))
        throw std::invalid_argument("config: C must be in (0,1]");
    if (static_cast<int>(std::ceil(participation * edges)) < 1)
        throw std::invalid_argument("config: ceil(C*K) must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("config: E must be >= 1");
    if (!(eta > 0.0f)) throw std::invalid_argument("config: eta must be > 0");
    if (passes < 1) throw std::invalid_argument("config: M must be >= 1");
    if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
    if (max_rounds < 0) throw std::invalid_argument("config: T must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
}

void EdgeState::absorb(const UploadDict& dict, const ClientData& client) {
    for (const UploadEntry& e : dict.entries) {
        const int dataset_index = client.indices[static_cast<std::size_t>(e.image_index)];
        auto it = buffer_pos.find(e.sample_id);
        if (it != buffer_pos.end()) {
            buffer[it->second].alpha = e.alpha;  // re-upload refreshes the score
        } else {
            buffer_pos.emplace(e.sample_id, buffer.size());
            buffer.push_back({e.sample_id, dataset_index, e.alpha});
        }
    }
}

void EdgeState::refresh_alpha() {
    if (buffer.empty()) {
        alpha_e = 0.0;
        return;
    }
    double acc = 0.0;
    for (const auto& s : buffer) acc += s.alpha;
    alpha_e = acc / static_cast<double>(buffer.size());
}

std::vector<EdgeState> build_edges(const Partition& partition, int edge_count) {
    if (edge_count < 1) throw std::invalid_argument("build_edges: need at least one edge");
    std::vector<EdgeState> edges(static_cast<std::size_t>(edge_count));
    for (int k = 0; k < edge_count; ++k) edges[static_cast<std::size_t>(k)].edge_id = k;
    for (std::size_t i = 0; i < partition.parts.size(); ++i) {
        ClientData c;
        c.client_id = static_cast<std::uint32_t>(i);
        c.indices = partition.parts[i];
        edges[i % static_cast<std::size_t>(edge_count)].clients.push_back(std::move(c));
    }
    return edges;
}

namespace {

Tensor gather_batch(const std::vector<Tensor>& images, const std::vector<int>& order,
                    std::size_t first, std::size_t count) {
    const auto& s0 = images[static_cast<std::size_t>(order[first])].shape;
    Tensor batch = Tensor::zeros({static_cast<int>(count), s0[0], s0[1], s0[2]});
    const std::size_t stride = images[static_cast<std::size_t>(order[first])].data.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Tensor& img = images[static_cast<std::size_t>(order[first + i])];
        std::copy(img.data.begin(), img.data.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return batch;
}

}  // namespace

ModelParams train_epochs(const NetworkSpec& spec, ModelParams params,
                         const LabeledDataset& train, const std::vector<int>& order,
                         int epochs, float eta, int batch_size, RngStream rng) {
    if (order.empty()) return params;
    std::vector<int> shuffled = order;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(shuffled);
        for (std::size_t first = 0; first < shuffled.size();
             first += static_cast<std::size_t>(batch_size)) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(batch_size), shuffled.size() - first);
            Tensor batch = gather_batch(train.images, shuffled, first, count);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i)
                labels[i] = train.labels[static_cast<std::size_t>(shuffled[first + i])];
            const LossGrads lg = loss_and_grads(spec, params, batch, labels, rng);
            params = sgd_step(params, lg.grads, eta);
        }
    }
    return params;
}

EdgeResult edge_update(EdgeState& state, const ModelParams& cloud_params,
                       const NetworkSpec& spec, const FederationConfig& cfg,
                       const LabeledDataset& train, int round, const RngStream& root) {
    state.local_params = cloud_params;
    if (!cfg.persistent_buffers) {
        state.buffer.clear();
        state.buffer_pos.clear();
    }

    EdgeResult result;
    const RngStream client_root = root.derive(rng_tag::client).derive(static_cast<std::uint64_t>(round));
    ClientConfig client_cfg{cfg.passes, cfg.epsilon};
    for (const ClientData& client : state.clients) {
        if (client.indices.empty()) continue;
        std::vector<Tensor> local_images;
        local_images.reserve(client.indices.size());
        for (int idx : client.indices) local_images.push_back(train.images[static_cast<std::size_t>(idx)]);
        const UploadDict dict =
            client_upload(client.client_id, spec, cloud_params, local_images, client_cfg,
                          client_root.derive(client.client_id), &result.records);
        result.uploaded_images += static_cast<long long>(dict.entries.size());
        state.absorb(dict, client);
    }
    state.refresh_alpha();

    if (state.buffer.empty()) {
        result.skipped = true;
        return result;
    }

    std::vector<int> order;
    order.reserve(state.buffer.size());
    for (const auto& s : state.buffer) order.push_back(s.dataset_index);

    const RngStream train_rng = root.derive(rng_tag::train)
                                    .derive(static_cast<std::uint64_t>(round))
                                    .derive(static_cast<std::uint64_t>(state.edge_id));
    state.local_params = train_epochs(spec, cloud_params, train, order, cfg.local_epochs,
                                      cfg.eta, cfg.batch_size, train_rng);

    result.skipped = false;
    result.params = state.local_params;
    result.alpha_e = state.alpha_e;
    result.sample_count = static_cast<long long>(state.buffer.size());
    return result;
}

namespace {

ModelParams weighted_param_sum(const std::vector<AggregateInput>& results,
                               const std::vector<double>& raw_weights, bool normalize) {
    double total = 0.0;
    for (double w : raw_weights) total += w;
    if (normalize && !(total > 0.0))
        throw std::invalid_argument("aggregate: weights sum to zero");

    const ModelParams& first = *results.front().params;
    ModelParams out;
    out.entries.reserve(first.entries.size());
    for (std::size_t e = 0; e < first.entries.size(); ++e) {
        const ParamEntry& ref = first.entries[e];
        for (const auto& r : results) {
            if (r.params->entries.size() != first.entries.size() ||
                !r.params->entries[e].weight.same_shape(ref.weight) ||
                !r.params->entries[e].bias.same_shape(ref.bias))
                throw std::invalid_argument("aggregate: incompatible param shapes");
        }
        ParamEntry sum{ref.layer, Tensor::zeros(ref.weight.shape), Tensor::zeros(ref.bias.shape)};
        for (std::size_t k = 0; k < ref.weight.data.size(); ++k) {
            double acc = 0.0;
            for (std::size_t r = 0; r < results.size(); ++r) {
                const double w = normalize ? raw_weights[r] / total : raw_weights[r];
                acc += w * static_cast<double>(results[r].params->entries[e].weight.data[k]);
            }
            sum.weight.data[k] = static_cast<float>(acc);
        }
        for (std::size_t k = 0; k < ref.bias.data.size(); ++k) {
            double acc = 0.0;
            for (std::size_t r = 0; r < results.size(); ++r) {
                const double w = normalize ? raw_weights[r] / total : raw_weights[r];
                acc += w * static_cast<double>(results[r].params->entries[e].bias.data[k]);
            }
            sum.bias.data[k] = static_cast<float>(acc);
        }
        out.entries.push_back(std::move(sum));
    }
    return out;
}

}  // namespace

ModelParams uwaa_aggregate(const std::vector<AggregateInput>& results, bool literal) {
    if (results.empty()) throw std::invalid_argument("uwaa_aggregate: empty result list");
    double n = 0.0;
    for (const auto& r : results) n += r.sample_count;
    if (!(n > 0.0)) throw std::invalid_argument("uwaa_aggregate: total sample count is zero");

    std::vector<double> w;
    w.reserve(results.size());
    if (literal) {
        for (const auto& r : results) w.push_back(std::exp(r.alpha) * r.sample_count / n);
        return weighted_param_sum(results, w, /*normalize=*/false);
    }
    // e^alpha * n_k with the 1/n folded into the normalization; when every
    // alpha is zero the raw weights equal fedavg's exactly
    for (const auto& r : results) w.push_back(std::exp(r.alpha) * r.sample_count);
    return weighted_param_sum(results, w, /*normalize=*/true);
}

ModelParams fedavg_aggregate(const std::vector<AggregateInput>& results) {
    if (results.empty()) throw std::invalid_argument("fedavg_aggregate: empty result list");
    std::vector<double> w;
    w.reserve(results.size());
    for (const auto& r : results) w.push_back(r.sample_count);
    return weighted_param_sum(results, w, /*normalize=*/true);
}

CloudState cloud_execute(const NetworkSpec& spec, const FederationConfig& cfg,
                         std::vector<EdgeState>& edges, const LabeledDataset& train,
                         const std::vector<Tensor>& eval_images,
                         const std::vector<int>& eval_labels, RngStream root,
                         RunLog* log,
                         const std::function<void(int, const ModelParams&)>& checkpoint_sink,
                         const ModelParams* initial_params) {
    cfg.validate();
    if (edges.empty()) throw std::invalid_argument("cloud_execute: no edges");

    CloudState cloud;
    cloud.omega_c = initial_params ? *initial_params : init_params(spec, root.derive(rng_tag::init));

    const int K = static_cast<int>(edges.size());
    const int per_round = std::min(K, static_cast<int>(std::ceil(cfg.participation * K)));
    const std::int64_t params_size = serialized_params_size(cloud.omega_c);

    for (int round = 0; round < cfg.max_rounds; ++round) {
        // uniform sample without replacement, processed in edge-id order
        RngStream select_rng = root.derive(rng_tag::select).derive(static_cast<std::uint64_t>(round));
        std::vector<int> ids(static_cast<std::size_t>(K));
        std::iota(ids.begin(), ids.end(), 0);
        for (int i = 0; i < per_round; ++i) {
            const int j = i + static_cast<int>(select_rng.next_below(static_cast<std::uint64_t>(K - i)));
            std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
        }
        std::vector<int> selected(ids.begin(), ids.begin() + per_round);
        std::sort(selected.begin(), selected.end());

        std::vector<EdgeResult> results;
        results.reserve(selected.size());
        for (int k : selected)
            results.push_back(edge_update(edges[static_cast<std::size_t>(k)], cloud.omega_c, spec,
                                          cfg, train, round, root));

        std::vector<AggregateInput> inputs;
        long long uploads = 0, params_bytes = 0;
        double alpha_sum = 0.0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            const EdgeResult& r = results[i];
            uploads += r.uploaded_images;
            params_bytes += params_size;  // download to the edge
            if (!r.skipped) {
                params_bytes += params_size;  // upload back to the cloud
                inputs.push_back({&r.params, r.alpha_e, static_cast<double>(r.sample_count)});
                alpha_sum += r.alpha_e;
            }
        }

        if (!inputs.empty())
            cloud.omega_c = cfg.aggregator == AggregatorKind::uwaa
                                ? uwaa_aggregate(inputs, cfg.uwaa_literal)
                                : fedavg_aggregate(inputs);
        // with every edge skipped the round is a no-op and omega_c stands

        RoundMetrics m;
        m.round = round;
        m.accuracy = evaluate(spec, cloud.omega_c, eval_images, eval_labels);
        m.uploads_images = uploads;
        m.uploads_bytes = uploads * static_cast<long long>(spec.input_h) * spec.input_w *
                          spec.input_c * 4;
        m.params_bytes = params_bytes;
        m.selected_edges = selected;
        m.mean_alpha = inputs.empty() ? 0.0 : alpha_sum / static_cast<double>(inputs.size());
        cloud.history.push_back(m);
        if (log) {
            for (std::size_t i = 0; i < results.size(); ++i)
                log->record_uncertainty(round, results[i].records, cfg.epsilon);
            log->record_round(m);
        }
        if (checkpoint_sink && cfg.checkpoint_every > 0 && round % cfg.checkpoint_every == 0)
            checkpoint_sink(round, cloud.omega_c);

        cloud.round = round + 1;
        if (cfg.target_accuracy > 0.0 && m.accuracy >= cfg.target_accuracy) break;
    }
    return cloud;
}

std::vector<TrajectoryPoint> run_centralized_sgd(const NetworkSpec& spec,
                                                 const FederationConfig& cfg,
                                                 const LabeledDataset& train,
                                                 const std::vector<int>& order,
                                                 const std::vector<Tensor>& eval_images,
                                                 const std::vector<int>& eval_labels,
                                                 RngStream root, ModelParams* final_params,
                                                 const ModelParams* initial_params) {
    if (order.empty()) throw std::invalid_argument("run_centralized_sgd: empty dataset");
    ModelParams params =
        initial_params ? *initial_params : init_params(spec, root.derive(rng_tag::init));
    std::vector<TrajectoryPoint> trajectory;
    trajectory.reserve(static_cast<std::size_t>(cfg.max_rounds));
    for (int round = 0; round < cfg.max_rounds; ++round) {
        const RngStream rng = root.derive(rng_tag::train)
                                  .derive(static_cast<std::uint64_t>(round))
                                  .derive(0);
        params = train_epochs(spec, std::move(params), train, order, cfg.local_epochs, cfg.eta,
                              cfg.batch_size, rng);
        const float acc = evaluate(spec, params, eval_images, eval_labels);
        trajectory.push_back({round, acc});
        if (cfg.target_accuracy > 0.0 && acc >= cfg.target_accuracy) break;
    }
    if (final_params) *final_params = std::move(params);
    return trajectory;
}

std::vector<std::vector<TrajectoryPoint>> run_standalone_sgd(
    const NetworkSpec& spec, const FederationConfig& cfg,
    const std::vector<EdgeState>& edges, const LabeledDataset& train,
    const std::vector<Tensor>& eval_images, const std::vector<int>& eval_labels,
    RngStream root) {
    std::vector<std::vector<TrajectoryPoint>> trajectories(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        std::vector<int> order;
        for (const ClientData& c : edges[k].clients)
            order.insert(order.end(), c.indices.begin(), c.indices.end());
        if (order.empty()) continue;
        ModelParams params = init_params(spec, root.derive(rng_tag::init));
        for (int round = 0; round < cfg.max_rounds; ++round) {
            const RngStream rng = root.derive(rng_tag::train)
                                      .derive(static_cast<std::uint64_t>(round))
                                      .derive(static_cast<std::uint64_t>(edges[k].edge_id));
            params = train_epochs(spec, std::move(params), train, order, cfg.local_epochs,
                                  cfg.eta, cfg.batch_size, rng);
            const float acc = evaluate(spec, params, eval_images, eval_labels);
            trajectories[k].push_back({round, acc});
            if (cfg.target_accuracy > 0.0 && acc >= cfg.target_accuracy) break;
        }
    }
    return trajectories;
}

}  // namespace fedsup
