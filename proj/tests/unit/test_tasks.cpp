// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "metalearn/errors.hpp"
#include "metalearn/task.hpp"

using namespace metalearn;

namespace {

const std::string kFixtureDir = METALEARN_FIXTURE_DIR;

// Set METALEARN_REGENERATE_FIXTURES=1 to rewrite the pinned fixtures.
bool regenerate() {
    const char* v = std::getenv("METALEARN_REGENERATE_FIXTURES");
    return v != nullptr && std::string(v) == "1";
}

TaskDistribution blobs(std::size_t way = 5, std::size_t shot = 1, std::size_t query = 15) {
    TaskDistribution d;
    d.kind = TaskKind::GaussianBlobs;
    d.way = way;
    d.shot = shot;
    d.query = query;
    return d;
}

TaskDistribution sinusoid(std::size_t shot = 5, std::size_t query = 10) {
    TaskDistribution d;
    d.kind = TaskKind::Sinusoid;
    d.dim = 1;
    d.way = 1;
    d.shot = shot;
    d.query = query;
    return d;
}

std::vector<double> row(const Tensor& t, std::size_t r) {
    const std::size_t d = t.shape()[1];
    return {t.data().begin() + r * d, t.data().begin() + (r + 1) * d};
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Query accuracy of nearest-mean classification against the given class means.
double nearest_mean_accuracy(const Task& task, const std::vector<std::vector<double>>& means) {
    std::size_t hits = 0;
    const std::size_t rows = task.query_set.rows();
    for (std::size_t r = 0; r < rows; ++r) {
        const auto x = row(task.query_set.inputs, r);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < means.size(); ++c) {
            const double d = sq_dist(x, means[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (static_cast<std::int32_t>(best) == task.query_set.labels()[r]) ++hits;
    }
    return double(hits) / double(rows);
}

}  // namespace

TEST(TaskDistribution, Validation) {
    EXPECT_THROW(blobs(1).validate(), ConfigError);
    EXPECT_THROW(blobs(5, 0).validate(), ConfigError);
    EXPECT_THROW(blobs(5, 1, 0).validate(), ConfigError);
    EXPECT_NO_THROW(sinusoid().validate());
    EXPECT_EQ(parse_task_kind("sinusoid"), TaskKind::Sinusoid);
    EXPECT_EQ(parse_task_kind("blobs"), TaskKind::GaussianBlobs);
    EXPECT_THROW(parse_task_kind("omniglot"), ConfigError);
}

TEST(SampleTask, ZeroNoiseBlobsSitOnTheirMeans) {
    auto dist = blobs(5, 2, 4);
    dist.noise = 0.0;
    const Task task = sample_task(dist, {1, StreamPurpose::Train, 0, 0});
    std::vector<std::vector<double>> means;
    for (std::size_t c = 0; c < 5; ++c) means.push_back(row(task.support.inputs, c * 2));
    for (std::size_t r = 0; r < task.support.rows(); ++r)
        EXPECT_EQ(row(task.support.inputs, r), means[task.support.labels()[r]]);
    EXPECT_EQ(nearest_mean_accuracy(task, means), 1.0);
}

TEST(SampleTask, SameKeyIsBitwiseIdentical) {
    const StreamKey key{9, StreamPurpose::Test, 4, 2};
    EXPECT_TRUE(identical(sample_task(blobs(), key), sample_task(blobs(), key)));
    EXPECT_TRUE(identical(sample_task(sinusoid(), key), sample_task(sinusoid(), key)));
    const StreamKey other{9, StreamPurpose::Test, 4, 3};
    EXPECT_FALSE(identical(sample_task(blobs(), key), sample_task(blobs(), other)));
    const StreamKey other_purpose{9, StreamPurpose::Train, 4, 2};
    EXPECT_FALSE(identical(sample_task(blobs(), key), sample_task(blobs(), other_purpose)));
}

TEST(SampleTask, BlobsAreClassBalancedWithRemappedLabels) {
    for (std::uint64_t e = 0; e < 20; ++e) {
        const Task task = sample_task(blobs(4, 3, 6), {5, StreamPurpose::Train, e, 0});
        EXPECT_EQ(task.support.rows(), 12u);
        EXPECT_EQ(task.query_set.rows(), 24u);
        for (std::int32_t c = 0; c < 4; ++c) {
            EXPECT_EQ(std::count(task.support.labels().begin(), task.support.labels().end(), c), 3);
            EXPECT_EQ(std::count(task.query_set.labels().begin(), task.query_set.labels().end(), c), 6);
        }
    }
}

TEST(SampleTask, SupportAndQueryAreDisjoint) {
    const Task task = sample_task(blobs(5, 5, 15), {3, StreamPurpose::Train, 0, 0});
    for (std::size_t s = 0; s < task.support.rows(); ++s)
        for (std::size_t q = 0; q < task.query_set.rows(); ++q)
            EXPECT_GT(sq_dist(row(task.support.inputs, s), row(task.query_set.inputs, q)), 0.0);
    const Task sin = sample_task(sinusoid(10, 10), {3, StreamPurpose::Train, 0, 0});
    for (std::size_t s = 0; s < 10; ++s)
        for (std::size_t q = 0; q < 10; ++q)
            EXPECT_NE(sin.support.inputs.data()[s], sin.query_set.inputs.data()[q]);
}

TEST(SampleTask, SinusoidTargetsBoundedByAmplitude) {
    const auto dist = sinusoid(10, 20);
    for (std::uint64_t e = 0; e < 50; ++e) {
        const Task task = sample_task(dist, {2, StreamPurpose::Train, e, 0});
        EXPECT_EQ(task.loss, LossKind::MeanSquaredError);
        for (const Batch* b : {&task.support, &task.query_set}) {
            for (std::size_t i = 0; i < b->rows(); ++i) {
                EXPECT_LE(std::abs(b->values().data()[i]), dist.amplitude_max);
                EXPECT_GE(b->inputs.data()[i], dist.x_min);
                EXPECT_LE(b->inputs.data()[i], dist.x_max);
            }
        }
    }
}

TEST(SampleTask, SinusoidTargetsFollowOneSineCurve) {
    // Recover amplitude and phase from two support points, then predict the rest.
    const Task task = sample_task(sinusoid(6, 6), {8, StreamPurpose::Train, 1, 0});
    const auto xs = task.support.inputs.data();
    const auto ys = task.support.values().data();
    // y = a sin x + b cos x with a = A cos(phi), b = A sin(phi).
    const double det = std::sin(xs[0]) * std::cos(xs[1]) - std::cos(xs[0]) * std::sin(xs[1]);
    ASSERT_GT(std::abs(det), 1e-3);
    const double a = (ys[0] * std::cos(xs[1]) - std::cos(xs[0]) * ys[1]) / det;
    const double b = (std::sin(xs[0]) * ys[1] - ys[0] * std::sin(xs[1])) / det;
    for (std::size_t i = 0; i < task.query_set.rows(); ++i) {
        const double x = task.query_set.inputs.data()[i];
        EXPECT_NEAR(task.query_set.values().data()[i], a * std::sin(x) + b * std::cos(x), 1e-9);
    }
    const double amplitude = std::hypot(a, b);
    EXPECT_GE(amplitude, 0.1 - 1e-9);
    EXPECT_LE(amplitude, 5.0 + 1e-9);
}

TEST(SampleEpisode, SingletonMatchesSampleTask) {
    EpisodeStream stream(4);
    const StreamKey key = stream.key(0);
    const auto episode = sample_episode(blobs(), 1, stream);
    ASSERT_EQ(episode.size(), 1u);
    EXPECT_TRUE(identical(episode[0], sample_task(blobs(), key)));
    EXPECT_EQ(stream.next_episode(), 1u);
}

TEST(SampleEpisode, ConsecutiveEpisodesDiffer) {
    EpisodeStream stream(4);
    const auto first = sample_episode(blobs(), 2, stream);
    const auto second = sample_episode(blobs(), 2, stream);
    EXPECT_FALSE(identical(first[0], second[0]));
    EXPECT_FALSE(identical(first[0], first[1]));
    EXPECT_THROW(sample_episode(blobs(), 0, stream), ConfigError);
}

TEST(SampleEpisode, StreamsAreAddressable) {
    // Sampling episode 3 directly equals sampling it after episodes 0..2.
    EpisodeStream sequential(6);
    for (int i = 0; i < 3; ++i) sample_episode(blobs(), 4, sequential);
    const auto third = sample_episode(blobs(), 4, sequential);
    for (std::uint64_t t = 0; t < 4; ++t)
        EXPECT_TRUE(identical(third[t], sample_task(blobs(), {6, StreamPurpose::Train, 3, t})));
}

TEST(Serialization, RoundTrip) {
    for (const auto& dist : {blobs(3, 2, 4), sinusoid(4, 7)}) {
        const Task task = sample_task(dist, {1, StreamPurpose::Train, 0, 0});
        std::stringstream buf;
        write_task(buf, task);
        EXPECT_TRUE(identical(read_task(buf), task));
    }
}

TEST(Serialization, HeaderLayoutIsLittleEndian) {
    const Task task = sample_task(blobs(2, 1, 1), {1, StreamPurpose::Train, 0, 0});
    std::stringstream buf;
    write_task(buf, task);
    const std::string bytes = buf.str();
    // 5 u32 header + (2 + 2) rows of 8 f64 + 4 i32 labels.
    EXPECT_EQ(bytes.size(), 20u + 4 * 8 * 8 + 4 * 4);
    const unsigned char expected[20] = {0, 0, 0, 0, 8, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    for (int i = 0; i < 20; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expected[i]) << i;
}

TEST(Serialization, TruncatedRecordIsDataError) {
    const Task task = sample_task(blobs(2, 1, 1), {1, StreamPurpose::Train, 0, 0});
    std::stringstream buf;
    write_task(buf, task);
    std::string bytes = buf.str();
    bytes.resize(bytes.size() - 3);
    std::stringstream cut(bytes);
    EXPECT_THROW(read_task(cut), DataError);
    std::stringstream bad_kind(std::string("\x07\0\0\0", 4));
    EXPECT_THROW(read_task(bad_kind), DataError);
    EXPECT_THROW(read_episode_file("/nonexistent/episode.bin"), DataError);
}

TEST(Serialization, GoldenEpisodeFixture) {
    EpisodeStream stream(2024);
    const auto episode = sample_episode(blobs(), 4, stream);
    const std::string path = kFixtureDir + "/episode_blobs_p4_seed2024.bin";
    if (regenerate()) write_episode_file(path, episode);
    ASSERT_TRUE(std::filesystem::exists(path)) << "missing fixture " << path;
    const auto golden = read_episode_file(path);
    ASSERT_EQ(golden.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(identical(golden[i], episode[i])) << "task " << i;
}

TEST(Calibration, NearestTrueMeanAccuracyOnDefaultBlobs) {
    // Monte-Carlo over 10^4 tasks with d=8, N=5, s=5, sigma=1. The true means are
    // recovered by resampling the same stream with zero noise.
    const auto dist = blobs(5, 1, 15);
    auto noiseless = dist;
    noiseless.noise = 0.0;
    double total = 0.0;
    const std::uint64_t tasks = 10000;
    for (std::uint64_t e = 0; e < tasks; ++e) {
        const StreamKey key{777, StreamPurpose::Test, e, 0};
        const Task clean = sample_task(noiseless, key);
        std::vector<std::vector<double>> means;
        for (std::size_t c = 0; c < 5; ++c) means.push_back(row(clean.support.inputs, c));
        total += nearest_mean_accuracy(sample_task(dist, key), means);
    }
    const double mean_accuracy = total / double(tasks);
    EXPECT_GT(mean_accuracy, 0.2);
    EXPECT_LT(mean_accuracy, 1.0);

    const std::string path = kFixtureDir + "/blobs_nearest_mean_accuracy.txt";
    if (regenerate()) {
        std::ofstream out(path);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g\n", mean_accuracy);
        out << buf;
    }
    std::ifstream in(path);
    ASSERT_TRUE(in) << "missing fixture " << path;
    double pinned = 0.0;
    in >> pinned;
    EXPECT_NEAR(mean_accuracy, pinned, 1e-12);
}
