#pragma once

// Expectation values, fidelities, 1-RDMs, stopping time and cost estimates.

#include <optional>
#include <vector>

#include "dsp/fock_basis.hpp"
#include "dsp/jumps.hpp"
#include "dsp/spectral.hpp"
#include "dsp/types.hpp"

namespace dsp {

struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> infidelity;
  std::vector<double> s2;
  std::vector<double> multiplicity;
  std::vector<double> trace_err;
  std::vector<double> pos_err;
  std::vector<double> herm_err;

  std::size_t size() const { return times.size(); }
};

/// What is measured at every sample.
struct ObservableSet {
  OperatorMatrix H;
  std::optional<OperatorMatrix> s2;
  CMatrix targets;  // orthonormal columns; may have zero columns
};

double expectation(const CMatrix& rho, const OperatorMatrix& op);
double expectation(const CVector& psi, const OperatorMatrix& op);

/// Sum_i <v_i|rho|v_i>. Throws ParameterError unless the columns are orthonormal to 1e-8.
double fidelity_subspace(const CMatrix& rho, const CMatrix& states);
double fidelity_subspace_pure(const CVector& psi, const CMatrix& states);

/// sqrt(1 + 4 <S^2>); NumericalError when the radicand is below -1e-8.
double multiplicity_from_s2(double s2);
double multiplicity(const CMatrix& rho, const OperatorMatrix& s2op);

struct DensitySanity {
  double trace_err = 0.0;
  double pos_err = 0.0;  // max(0, -lambda_min)
  double herm_err = 0.0;
};
DensitySanity density_sanity(const CMatrix& rho);

/// Appends one sample for a density matrix.
void record_sample(ObservableSeries& series, double t, const CMatrix& rho, const ObservableSet& obs);

struct OneRdm {
  CMatrix spin_orbital;  // 2L x 2L, flattened spin-orbital order
  CMatrix spatial;       // L x L, spin-summed
};

/// D_ij = Tr(rho c+_j c_i). With phi, the spatial block is rotated to phi D phi^+.
OneRdm one_rdm(const CMatrix& rho, const SectorBasis& basis, const std::optional<CMatrix>& phi = std::nullopt);

inline constexpr double kChemicalAccuracy = 1.6e-3;
inline constexpr int kPersistenceSamples = 20;

/// Earliest t_i with |E_k - E_ref| < threshold for k = i..i+persistence.
std::optional<double> time_to_chemical_accuracy(const ObservableSeries& series, double e_ref,
                                                double threshold = kChemicalAccuracy,
                                                int persistence = kPersistenceSamples);

struct ResourceEstimate {
  bool available = false;
  bool trivial_sector = false;
  double T = 0.0;
  double C_K = 0.0;
  double k_norms = 0.0;
  double L_be_norm = 0.0;
  double total = 0.0;
};

/// C_K = radius/gap of H (plain, symmetry), its square (folded), or radius over
/// the gap among levels >= mu (projected). spec is the spectrum of H.
ResourceEstimate resource_estimate(const ProtocolMode& mode, const Spectrum& spec, const JumpSet& jumps,
                                   std::optional<double> T);

}  // namespace dsp
