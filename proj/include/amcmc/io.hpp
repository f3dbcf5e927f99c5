#ifndef AMCMC_IO_HPP
#define AMCMC_IO_HPP

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include "config.hpp"
#include "spectral.hpp"

namespace amcmc {

inline constexpr const char* kTrajectoryHeader = "iter,t,dt,l2_error,hamiltonian,potential,min_p,restarts";

/// CSV with 17 significant digits; jump trajectories carry total_particles and restarts_this_iter.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryHeader;
  if (traj.jump) out << ",total_particles,restarts_this_iter";
  out << '\n';
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  for (const auto& r : traj.records) {
    out << r.iter << ',' << r.t << ',' << r.dt << ',' << r.l2_error << ',' << r.hamiltonian << ',' << r.potential << ','
        << r.min_p << ',' << r.restarts;
    if (traj.jump) out << ',' << r.total_particles << ',' << r.restarts_this_iter;
    out << '\n';
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_trajectory_csv(out, traj);
}

inline json complex_to_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const SpectralReport& r) {
  json q = json::array();
  for (Eigen::Index i = 0; i < r.q_eigenvalues.size(); ++i) q.push_back(r.q_eigenvalues[i]);
  json l = json::array();
  for (Eigen::Index i = 0; i < r.l_eigenvalues.size(); ++i) l.push_back(complex_to_json(r.l_eigenvalues[i]));
  json out = {{"q_eigenvalues", q},
              {"alpha_star", r.alpha_star},
              {"recommended_d", r.recommended_d},
              {"damping", r.damping},
              {"hypothesis_holds", r.hypothesis_holds},
              {"l_eigenvalues", l},
              {"mu_star", nullptr},
              {"mu_star_ties", r.mu_star_ties},
              {"lambda_rayleigh", r.lambda_rayleigh}};
  if (r.mu_star) out["mu_star"] = r.mu_star->real();
  if (r.mu_star) out["mu_star_imag"] = r.mu_star->imag();
  return out;
}

/// {config, hash, seed} plus the list of files written.
inline json run_manifest(const json& config, const std::string& hash, std::uint64_t seed, const std::vector<std::string>& files) {
  return {{"config", config}, {"hash", hash}, {"seed", seed}, {"files", files}};
}

}  // namespace amcmc

#endif  // AMCMC_IO_HPP
