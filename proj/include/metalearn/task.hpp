// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "metalearn/mlp.hpp"

namespace metalearn {

enum class TaskKind : std::uint32_t { GaussianBlobs = 0, Sinusoid = 1 };

const char* task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

/// One few-shot task: the support split adapts the weights, the query split
/// scores the adapted weights.
///
/// For Gaussian blobs the support holds `shot` rows per class and the query
/// `query` rows per class, ordered class by class with labels 0..way-1. For
/// sinusoid regression `way` is 1, the support holds `shot` points and the
/// query `query` points.
struct Task {
    TaskKind kind = TaskKind::GaussianBlobs;
    LossKind loss = LossKind::CrossEntropy;
    std::size_t way = 0;
    std::size_t shot = 0;
    std::size_t query = 0;
    Batch support;
    Batch query_set;
};

bool identical(const Task& a, const Task& b);

/// Synthetic task family.
///
/// Gaussian blobs: `way` class means uniform in [-separation, separation]^dim,
/// every point is its class mean plus `noise` times a standard normal.
/// Sinusoid: amplitude and phase uniform in their ranges, inputs uniform in
/// [x_min, x_max], target amplitude * sin(x + phase).
struct TaskDistribution {
    TaskKind kind = TaskKind::GaussianBlobs;
    std::size_t dim = 8;
    std::size_t way = 5;
    std::size_t shot = 1;
    std::size_t query = 15;
    double separation = 5.0;
    double noise = 1.0;
    double amplitude_min = 0.1;
    double amplitude_max = 5.0;
    double phase_min = 0.0;
    double phase_max = std::numbers::pi;
    double x_min = -5.0;
    double x_max = 5.0;

    void validate() const;
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    LossKind loss_kind() const;
};

/// Which independent family of streams a task comes from.
enum class StreamPurpose : std::uint64_t { Train = 1, Validation = 2, Test = 3 };

/// Address of one task's random stream.
struct StreamKey {
    std::uint64_t seed = 0;
    StreamPurpose purpose = StreamPurpose::Train;
    std::uint64_t episode = 0;
    std::uint64_t task = 0;
};

/// Hands out consecutive episode indices under one (seed, purpose).
class EpisodeStream {
public:
    explicit EpisodeStream(std::uint64_t seed, StreamPurpose purpose = StreamPurpose::Train)
        : seed_(seed), purpose_(purpose) {}

    StreamKey key(std::uint64_t task) const { return {seed_, purpose_, next_episode_, task}; }
    std::uint64_t next_episode() const noexcept { return next_episode_; }
    void advance() noexcept { ++next_episode_; }

private:
    std::uint64_t seed_;
    StreamPurpose purpose_;
    std::uint64_t next_episode_ = 0;
};

Task sample_task(const TaskDistribution& dist, const StreamKey& key);

/// P tasks keyed by the stream's current episode, task indices 0..P-1; then
/// advances the stream.
std::vector<Task> sample_episode(const TaskDistribution& dist, std::size_t tasks,
                                 EpisodeStream& stream);

/// Flat little-endian record: u32 header (kind, d, N, K, Q), then the support
/// block and the query block. Each block is the f64 input matrix followed by
/// i32 labels (classification) or f64 targets (regression).
void write_task(std::ostream& out, const Task& task);
Task read_task(std::istream& in);
void write_episode_file(const std::string& path, const std::vector<Task>& tasks);
std::vector<Task> read_episode_file(const std::string& path);

}  // namespace metalearn
