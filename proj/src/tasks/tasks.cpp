// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "metalearn/binary_io.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/rng.hpp"
#include "metalearn/task.hpp"

namespace metalearn {

const char* task_kind_name(TaskKind kind) {
    return kind == TaskKind::GaussianBlobs ? "blobs" : "sinusoid";
}

TaskKind parse_task_kind(const std::string& name) {
    if (name == "blobs" || name == "gaussian-blobs") return TaskKind::GaussianBlobs;
    if (name == "sinusoid") return TaskKind::Sinusoid;
    throw ConfigError("unknown task kind '" + name + "'");
}

namespace {

bool same_tensor(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i]))
            return false;
    }
    return true;
}

bool same_batch(const Batch& a, const Batch& b) {
    if (!same_tensor(a.inputs, b.inputs) || a.has_labels() != b.has_labels()) return false;
    return a.has_labels() ? a.labels() == b.labels() : same_tensor(a.values(), b.values());
}

}  // namespace

bool identical(const Task& a, const Task& b) {
    return a.kind == b.kind && a.loss == b.loss && a.way == b.way && a.shot == b.shot &&
           a.query == b.query && same_batch(a.support, b.support) &&
           same_batch(a.query_set, b.query_set);
}

void TaskDistribution::validate() const {
    if (shot < 1 || query < 1) throw ConfigError("task distribution: shot and query must be >= 1");
    if (kind == TaskKind::GaussianBlobs) {
        if (way < 2) throw ConfigError("task distribution: classification needs way >= 2");
        if (dim < 1) throw ConfigError("task distribution: dim must be >= 1");
        if (!(separation > 0.0) || !(noise >= 0.0)) {
            throw ConfigError("task distribution: separation must be > 0 and noise >= 0");
        }
    } else if (!(amplitude_min <= amplitude_max) || !(phase_min <= phase_max) || !(x_min < x_max)) {
        throw ConfigError("task distribution: empty sinusoid range");
    }
}

std::size_t TaskDistribution::input_dim() const {
    return kind == TaskKind::GaussianBlobs ? dim : 1;
}

std::size_t TaskDistribution::output_dim() const {
    return kind == TaskKind::GaussianBlobs ? way : 1;
}

LossKind TaskDistribution::loss_kind() const {
    return kind == TaskKind::GaussianBlobs ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
}

namespace {

Task sample_blobs(const TaskDistribution& dist, Rng& rng) {
    const std::size_t d = dist.dim;
    const std::size_t n = dist.way;
    std::vector<double> means(n * d);
    for (double& m : means) m = rng.uniform(-dist.separation, dist.separation);

    std::vector<double> support(n * dist.shot * d);
    std::vector<double> query(n * dist.query * d);
    Labels support_labels;
    Labels query_labels;
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < dist.shot + dist.query; ++r) {
            const bool in_support = r < dist.shot;
            double* row = in_support ? &support[(c * dist.shot + r) * d]
                                     : &query[(c * dist.query + r - dist.shot) * d];
            for (std::size_t j = 0; j < d; ++j) row[j] = means[c * d + j] + dist.noise * rng.normal();
            (in_support ? support_labels : query_labels).push_back(static_cast<std::int32_t>(c));
        }
    }
    Task task;
    task.kind = TaskKind::GaussianBlobs;
    task.loss = LossKind::CrossEntropy;
    task.way = n;
    task.shot = dist.shot;
    task.query = dist.query;
    task.support = Batch{Tensor({n * dist.shot, d}, std::move(support)), std::move(support_labels)};
    task.query_set = Batch{Tensor({n * dist.query, d}, std::move(query)), std::move(query_labels)};
    return task;
}

Task sample_sinusoid(const TaskDistribution& dist, Rng& rng) {
    const double amplitude = rng.uniform(dist.amplitude_min, dist.amplitude_max);
    const double phase = rng.uniform(dist.phase_min, dist.phase_max);
    auto draw = [&](std::size_t count) {
        std::vector<double> xs(count);
        std::vector<double> ys(count);
        for (std::size_t i = 0; i < count; ++i) {
            xs[i] = rng.uniform(dist.x_min, dist.x_max);
            ys[i] = amplitude * std::sin(xs[i] + phase);
        }
        return Batch{Tensor({count, 1}, std::move(xs)), Tensor({count, 1}, std::move(ys))};
    };
    Task task;
    task.kind = TaskKind::Sinusoid;
    task.loss = LossKind::MeanSquaredError;
    task.way = 1;
    task.shot = dist.shot;
    task.query = dist.query;
    task.support = draw(dist.shot);
    task.query_set = draw(dist.query);
    return task;
}

}  // namespace

Task sample_task(const TaskDistribution& dist, const StreamKey& key) {
    dist.validate();
    Rng rng(Rng::key({key.seed, static_cast<std::uint64_t>(key.purpose), key.episode, key.task}));
    return dist.kind == TaskKind::GaussianBlobs ? sample_blobs(dist, rng)
                                                : sample_sinusoid(dist, rng);
}

std::vector<Task> sample_episode(const TaskDistribution& dist, std::size_t tasks,
                                 EpisodeStream& stream) {
    if (tasks < 1) throw ConfigError("sample_episode: need at least one task");
    std::vector<Task> episode;
    episode.reserve(tasks);
    for (std::size_t i = 0; i < tasks; ++i) episode.push_back(sample_task(dist, stream.key(i)));
    stream.advance();
    return episode;
}

namespace {

void write_batch(std::ostream& out, const Batch& batch) {
    binary::write_f64s(out, batch.inputs.data());
    if (batch.has_labels()) {
        for (std::int32_t l : batch.labels()) binary::write_i32(out, l);
    } else {
        binary::write_f64s(out, batch.values().data());
    }
}

Batch read_batch(std::istream& in, std::size_t rows, std::size_t dim, bool labels) {
    std::vector<double> x(rows * dim);
    for (double& v : x) v = binary::read_f64(in);
    Tensor inputs({rows, dim}, std::move(x));
    if (labels) {
        Labels ls(rows);
        for (auto& l : ls) l = binary::read_i32(in);
        return Batch{std::move(inputs), std::move(ls)};
    }
    std::vector<double> y(rows);
    for (double& v : y) v = binary::read_f64(in);
    return Batch{std::move(inputs), Tensor({rows, 1}, std::move(y))};
}

}  // namespace

void write_task(std::ostream& out, const Task& task) {
    binary::write_u32(out, static_cast<std::uint32_t>(task.kind));
    binary::write_u32(out, static_cast<std::uint32_t>(task.support.inputs.shape()[1]));
    binary::write_u32(out, static_cast<std::uint32_t>(task.way));
    binary::write_u32(out, static_cast<std::uint32_t>(task.shot));
    binary::write_u32(out, static_cast<std::uint32_t>(task.query));
    write_batch(out, task.support);
    write_batch(out, task.query_set);
}

Task read_task(std::istream& in) {
    const std::uint32_t kind = binary::read_u32(in);
    if (kind > 1) throw DataError("task record: unknown kind " + std::to_string(kind));
    Task task;
    task.kind = static_cast<TaskKind>(kind);
    const std::size_t d = binary::read_u32(in);
    task.way = binary::read_u32(in);
    task.shot = binary::read_u32(in);
    task.query = binary::read_u32(in);
    const bool classification = task.kind == TaskKind::GaussianBlobs;
    task.loss = classification ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
    const std::size_t per_class = classification ? task.way : 1;
    task.support = read_batch(in, per_class * task.shot, d, classification);
    task.query_set = read_batch(in, per_class * task.query, d, classification);
    return task;
}

void write_episode_file(const std::string& path, const std::vector<Task>& tasks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (const auto& t : tasks) write_task(out, t);
}

std::vector<Task> read_episode_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<Task> tasks;
    while (in.peek() != std::char_traits<char>::eof()) tasks.push_back(read_task(in));
    return tasks;
}

}  // namespace metalearn
