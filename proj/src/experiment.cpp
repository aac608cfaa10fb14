#include "dkm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <thread>

namespace dkm {

std::vector<SamplerBundle> build_samplers(const std::vector<std::string>& names,
                                          const DistributionSpec& dist,
                                          const KnockoffMachine* machine,
                                          const Matrix* train_data,
                                          double second_order_shrinkage) {
  std::vector<SamplerBundle> out;
  for (const std::string& name : names) {
    if (name == "machine") {
      if (!machine)
        throw ConfigError("samplers: 'machine' requested but no trained machine");
      const KnockoffMachine* m = machine;
      out.push_back({name, [m](const Matrix& x, RngStream& rng) {
                       return generate(*m, x, rng);
                     }});
    } else if (name == "second-order") {
      if (!train_data)
        throw ConfigError("samplers: 'second-order' requested but no training data");
      const Matrix sigma = estimate_covariance(*train_data, second_order_shrinkage);
      const Vector mu = train_data->colwise().mean().transpose();
      auto model = std::make_shared<GaussianModel>(make_gaussian_model(mu, sigma));
      out.push_back({name, [model](const Matrix& x, RngStream& rng) {
                       return gaussian_knockoffs(*model, x, rng);
                     }});
    } else if (name == "oracle") {
      if (dist.kind == DistributionKind::ar1_gaussian ||
          dist.kind == DistributionKind::custom_sigma_gaussian) {
        const Matrix sigma = spec_sigma(dist);
        auto model = std::make_shared<GaussianModel>(
            make_gaussian_model(Vector::Zero(dist.p), sigma));
        out.push_back({name, [model](const Matrix& x, RngStream& rng) {
                         return gaussian_knockoffs(*model, x, rng);
                       }});
      } else if (dist.kind == DistributionKind::gaussian_mixture) {
        auto model = std::make_shared<MixtureModel>();
        for (double rho : dist.mix_rhos) {
          MixtureComponent c;
          c.weight = 1.0 / double(dist.mix_rhos.size());
          c.model = make_gaussian_model(Vector::Zero(dist.p),
                                        ar1_sigma(dist.p, rho));
          model->components.push_back(std::move(c));
        }
        out.push_back({name, [model](const Matrix& x, RngStream& rng) {
                         return mixture_oracle_knockoffs(*model, x, rng);
                       }});
      } else {
        throw ConfigError(
            "samplers: oracle is only available for Gaussian and mixture "
            "distributions");
      }
    } else if (name == "identity") {
      out.push_back({name, [](const Matrix& x, RngStream&) { return x; }});
    } else if (name == "noise") {
      out.push_back({name, [](const Matrix& x, RngStream& rng) {
                       return sample_std_normal(rng, x.rows(), x.cols());
                     }});
    } else {
      throw ConfigError("samplers: unknown sampler '" + name + "'");
    }
  }
  return out;
}

namespace {

void validate_cfg(const SelectionExperimentConfig& cfg) {
  cfg.dist.validate();
  if (cfg.m < 4) throw ConfigError("experiment: m must be >= 4");
  if (cfg.replicates < 1) throw ConfigError("experiment: replicates must be >= 1");
  if (cfg.amplitudes.empty()) throw ConfigError("experiment: no amplitudes");
  if (!(cfg.q > 0.0) || !(cfg.q < 1.0))
    throw ConfigError("experiment: q must lie in (0,1)");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw ConfigError("experiment: alpha must lie in [0,1]");
  if (cfg.cv_folds < 2) throw ConfigError("experiment: cv_folds must be >= 2");
  if (cfg.grid_size < 1) throw ConfigError("experiment: grid_size must be >= 1");
  if (cfg.threads < 1) throw ConfigError("experiment: threads must be >= 1");
  if (cfg.signals < 1 || cfg.signals > cfg.dist.p)
    throw ConfigError("experiment: need 1 <= signals <= p");
}

}  // namespace

SelectionExperimentResult run_selection_experiment(
    const SelectionExperimentConfig& cfg,
    const std::vector<SamplerBundle>& samplers) {
  validate_cfg(cfg);
  if (samplers.empty()) throw ConfigError("experiment: no samplers");

  RngStream master(cfg.seed);
  Matrix fixed_x = cfg.fixed_x;
  if (cfg.mode == ExperimentMode::fixed_x && fixed_x.size() == 0) {
    RngStream rs = master.substream(0xF1);
    fixed_x = sample_from_spec(cfg.dist, cfg.m, rs);
  }
  if (cfg.mode == ExperimentMode::fixed_x && fixed_x.cols() != cfg.dist.p)
    throw ConfigError("experiment: fixed X column count does not match p");

  const int n_amp = int(cfg.amplitudes.size());
  const int n_samp = int(samplers.size());
  const int total = n_amp * cfg.replicates;

  std::vector<SelectionRow> rows(std::size_t(total) * n_samp);

  auto run_one = [&](int task) {
    const int a = task / cfg.replicates;
    const int rep = task % cfg.replicates;
    const double amplitude = cfg.amplitudes[std::size_t(a)];
    RngStream rs = master.substream(std::uint64_t(task) + 1);

    Matrix x;
    if (cfg.mode == ExperimentMode::fresh_x)
      x = sample_from_spec(cfg.dist, cfg.m, rs);
    else
      x = fixed_x;

    ResponseSpec rspec;
    rspec.k = cfg.signals;
    rspec.amplitude = amplitude;
    rspec.random_signs = cfg.random_signs;
    const Response resp = simulate_response(x, rspec, rs);

    for (int s = 0; s < n_samp; ++s) {
      RngStream rs_s = rs.substream(std::uint64_t(s) + 100);
      const Matrix xt = samplers[std::size_t(s)].fn(x, rs_s);
      Matrix design(x.rows(), 2 * x.cols());
      design.leftCols(x.cols()) = x;
      design.rightCols(x.cols()) = xt;

      const auto grid =
          default_tau_grid(design, resp.y, cfg.alpha, cfg.grid_size, cfg.grid_ratio);
      RngStream rs_cv = rs.substream(std::uint64_t(s) + 500);
      const CvResult cv =
          cv_tune(design, resp.y, cfg.alpha, grid, cfg.cv_folds, rs_cv);
      const ElasticNetFit fit = elastic_net(design, resp.y, cfg.alpha, cv.tau);
      const Vector w = knockoff_stats(fit);
      SelectionResult sel = knockoff_filter(w, cfg.q);
      const auto [fdp, power] = score_selection(sel.selected, resp.support);

      SelectionRow row;
      row.amplitude = amplitude;
      row.sampler = samplers[std::size_t(s)].name;
      row.replicate = rep;
      row.fdp = fdp;
      row.power = power;
      row.n_selected = int(sel.selected.size());
      row.threshold = sel.threshold;
      row.tau = cv.tau;
      rows[std::size_t(task) * n_samp + std::size_t(s)] = std::move(row);
    }
  };

  if (cfg.threads <= 1) {
    for (int task = 0; task < total; ++task) run_one(task);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int task = next.fetch_add(1);
        if (task >= total) return;
        run_one(task);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SelectionExperimentResult res;
  // rows laid out as (amplitude, replicate, sampler); reorder to
  // (amplitude, sampler, replicate) for output stability
  res.rows.reserve(rows.size());
  for (int a = 0; a < n_amp; ++a)
    for (int s = 0; s < n_samp; ++s)
      for (int rep = 0; rep < cfg.replicates; ++rep)
        res.rows.push_back(
            rows[(std::size_t(a) * cfg.replicates + rep) * n_samp + s]);

  for (int a = 0; a < n_amp; ++a) {
    for (int s = 0; s < n_samp; ++s) {
      SelectionSummary sum;
      sum.amplitude = cfg.amplitudes[std::size_t(a)];
      sum.sampler = samplers[std::size_t(s)].name;
      sum.replicates = cfg.replicates;
      double acc_f = 0.0, acc_p = 0.0;
      for (int rep = 0; rep < cfg.replicates; ++rep) {
        const auto& row =
            res.rows[(std::size_t(a) * n_samp + s) * cfg.replicates + rep];
        acc_f += row.fdp;
        acc_p += row.power;
      }
      sum.mean_fdr = acc_f / cfg.replicates;
      sum.mean_power = acc_p / cfg.replicates;
      double var_f = 0.0, var_p = 0.0;
      for (int rep = 0; rep < cfg.replicates; ++rep) {
        const auto& row =
            res.rows[(std::size_t(a) * n_samp + s) * cfg.replicates + rep];
        var_f += (row.fdp - sum.mean_fdr) * (row.fdp - sum.mean_fdr);
        var_p += (row.power - sum.mean_power) * (row.power - sum.mean_power);
      }
      const double denom = std::max(1, cfg.replicates - 1);
      sum.se_fdr = std::sqrt(var_f / denom / cfg.replicates);
      sum.se_power = std::sqrt(var_p / denom / cfg.replicates);
      res.summaries.push_back(std::move(sum));
    }
  }
  return res;
}

}  // namespace dkm
