#include <benchmark/benchmark.h>

#include <vector>

#include "ditto/kernels.hpp"
#include "ditto/registration.hpp"
#include "ditto/rng.hpp"

using namespace ditto;

namespace {

std::vector<Point3> cloud(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  return out;
}

std::vector<kernels::RigidHypothesis> hypotheses(std::size_t n) {
  Rng rng(3);
  std::vector<kernels::RigidHypothesis> out(n);
  for (auto& h : out) {
    const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    h.rotation = Eigen::AngleAxisd(rng.uniform(0.0, 0.2), axis.normalized()).toRotationMatrix();
    h.translation = Eigen::Vector3d(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01));
    h.valid = true;
  }
  return out;
}

template <bool Parallel>
void BM_CountInliers(benchmark::State& state) {
  const auto src = cloud(1, static_cast<std::size_t>(state.range(0)));
  std::vector<Point3> dst = src;
  const auto hyps = hypotheses(64);
  std::vector<std::int64_t> counts(hyps.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::count_inliers(hyps, src, dst, 0.01, counts);
    } else {
      kernels::serial::count_inliers(hyps, src, dst, 0.01, counts);
    }
    benchmark::DoNotOptimize(counts.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(hyps.size()));
}

template <bool Parallel>
void BM_NearestDistances(benchmark::State& state) {
  const auto a = cloud(1, static_cast<std::size_t>(state.range(0)));
  const auto b = cloud(2, static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(a.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::nearest_squared_distances(a, b, out);
    } else {
      kernels::serial::nearest_squared_distances(a, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Ransac(benchmark::State& state) {
  Rng rng(5);
  const Pose gt = Pose::from_axis_angle(Point3(1, 2, 3), 0.4, Point3(0.1, 0.0, -0.2));
  PointPairSet pairs;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (const auto& p : cloud(6, n)) pairs.add(p, rng.uniform() < 0.4 ? Point3(rng.uniform(), rng.uniform(), 0) : gt.apply(p));
  RansacParams params;
  params.early_exit_ratio = 1.0;
  for (auto _ : state) {
    const RegistrationResult r = Parallel ? fit_rigid_ransac(pairs, params) : fit_rigid_ransac_serial(pairs, params);
    benchmark::DoNotOptimize(r.pose);
  }
}

}  // namespace

BENCHMARK(BM_CountInliers<false>)->Name("count_inliers/serial")->Arg(1000)->Arg(20000);
BENCHMARK(BM_CountInliers<true>)->Name("count_inliers/openmp")->Arg(1000)->Arg(20000)->UseRealTime();
BENCHMARK(BM_NearestDistances<false>)->Name("nearest/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_NearestDistances<true>)->Name("nearest/openmp")->Arg(2000)->Arg(20000)->UseRealTime();
BENCHMARK(BM_Ransac<false>)->Name("ransac/serial")->Arg(500)->Arg(5000);
BENCHMARK(BM_Ransac<true>)->Name("ransac/openmp")->Arg(500)->Arg(5000)->UseRealTime();

BENCHMARK_MAIN();
