// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "dsp/dynamics.hpp"
#include "dsp/hamiltonian_io.hpp"
#include "dsp/jumps.hpp"

namespace {

struct Model {
  dsp::SectorBasis basis;
  dsp::OperatorMatrix H;
  dsp::Spectrum spec;
  dsp::CouplingSet couplings;
  dsp::FilterSpec filter;
  dsp::JumpSet jumps;

  explicit Model(int sites)
      : basis(dsp::SectorBasis::sector(sites, sites / 2, sites / 2)),
        H(dsp::assemble_hamiltonian(dsp::hubbard_integrals(sites, 1.0, 4.0), basis)),
        spec(dsp::eigendecompose(H)),
        couplings(dsp::coupling_set(basis, dsp::CouplingBase::S_II)),
        filter(dsp::default_filter_params(spec)),
        jumps(dsp::build_jump_set(spec, couplings, dsp::ProtocolMode::plain(), filter)) {}
};

const Model& model(int sites) {
  static const Model m4(4), m5(5);
  return sites == 4 ? m4 : m5;
}

dsp::CMatrix mixed(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return dsp::CMatrix::Identity(n, n) / static_cast<double>(d);
}

void BM_LiouvillianApply_Parallel(benchmark::State& st) {
  const auto& m = model(static_cast<int>(st.range(0)));
  const auto L = dsp::build_liouvillian(m.H, m.jumps, {});
  const auto rho = mixed(m.basis.size());
  for (auto _ : st) benchmark::DoNotOptimize(L.apply(rho));
}

void BM_LiouvillianApply_Serial(benchmark::State& st) {
  const auto& m = model(static_cast<int>(st.range(0)));
  const auto L = dsp::build_liouvillian(m.H, m.jumps, {});
  const auto rho = mixed(m.basis.size());
  for (auto _ : st) benchmark::DoNotOptimize(dsp::serial::apply(L, rho));
}

void BM_Hamiltonian_Parallel(benchmark::State& st) {
  const int L = static_cast<int>(st.range(0));
  const auto ints = dsp::hubbard_integrals(L, 1.0, 4.0);
  const auto basis = dsp::SectorBasis::sector(L, L / 2, L / 2);
  for (auto _ : st) benchmark::DoNotOptimize(dsp::assemble_hamiltonian(ints, basis));
}

void BM_Hamiltonian_Serial(benchmark::State& st) {
  const int L = static_cast<int>(st.range(0));
  const auto ints = dsp::hubbard_integrals(L, 1.0, 4.0);
  const auto basis = dsp::SectorBasis::sector(L, L / 2, L / 2);
  for (auto _ : st) benchmark::DoNotOptimize(dsp::serial::assemble_hamiltonian(ints, basis));
}

void BM_Jumps_Parallel(benchmark::State& st) {
  const auto& m = model(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(dsp::build_jump_set(m.spec, m.couplings, dsp::ProtocolMode::plain(), m.filter));
}

void BM_Jumps_Serial(benchmark::State& st) {
  const auto& m = model(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(dsp::serial::build_jump_set(m.spec, m.couplings, dsp::ProtocolMode::plain(), m.filter));
}

dsp::TrajectoryOptions traj_options() {
  dsp::TrajectoryOptions o;
  o.n_traj = 64;
  o.seed = 7;
  return o;
}

void BM_Trajectories_Parallel(benchmark::State& st) {
  const auto& m = model(4);
  const auto psi = dsp::build_reference_state(m.basis, dsp::ReferencePreset::hf_aufbau).amplitudes;
  const dsp::ObservableSet obs{m.H, std::nullopt, m.spec.level_vectors(0)};
  for (auto _ : st) benchmark::DoNotOptimize(dsp::mc_trajectories(m.H, m.jumps, psi, 2.0, 0.1, obs, traj_options()));
}

void BM_Trajectories_Serial(benchmark::State& st) {
  const auto& m = model(4);
  const auto psi = dsp::build_reference_state(m.basis, dsp::ReferencePreset::hf_aufbau).amplitudes;
  const dsp::ObservableSet obs{m.H, std::nullopt, m.spec.level_vectors(0)};
  for (auto _ : st)
    benchmark::DoNotOptimize(dsp::serial::mc_trajectories(m.H, m.jumps, psi, 2.0, 0.1, obs, traj_options()));
}

}  // namespace

BENCHMARK(BM_LiouvillianApply_Parallel)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LiouvillianApply_Serial)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Hamiltonian_Parallel)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Hamiltonian_Serial)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Jumps_Parallel)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Jumps_Serial)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trajectories_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trajectories_Serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
