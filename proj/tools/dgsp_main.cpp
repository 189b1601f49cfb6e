#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <dgsp/dgsp.hpp>

namespace {

namespace fs = std::filesystem;

dgsp::io::KernelSpec kernel_from_arg(const std::string& arg) {
  if (arg == "allpass") return {};
  if (arg == "lambda") {
    dgsp::io::KernelSpec k;
    k.kind = dgsp::io::KernelSpec::Kind::Lambda;
    return k;
  }
  return dgsp::io::read_kernel_json(arg);
}

dgsp::Signal pick_row(const dgsp::io::SignalFile& sf, long row) {
  if (row < 0 || row >= sf.rows.rows())
    throw dgsp::ParseError("signal row " + std::to_string(row) + " out of range [0, " +
                           std::to_string(sf.rows.rows()) + ")");
  return dgsp::Signal(sf.vertex_set, sf.rows.row(row).transpose());
}

fs::path out_or(const std::string& out, const char* fallback) {
  return out.empty() ? fs::path(fallback) : fs::path(out);
}

void note(const fs::path& path) { std::cout << "wrote " << path.string() << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgsp: signal processing over distributions of graph shift operators"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out;
  std::string config;
  app.add_option("--seed", seed, "seed for all randomness");
  app.add_option("--out", out, "output file or directory (command-dependent default)");
  app.add_option("--config", config, "JSON config file");

  std::string spec_path, signal_path, kernel_arg = "allpass", map_path, target_path;
  long row = 0;
  long bottom = 1;
  long budget = 0;
  double threshold = -1.0;
  double epsilon = -1.0;
  std::string mode = "fibers";
  std::string pipeline = "sampling";
  std::string graph_kind = "lattice", signal_model = "bandlimited";
  long rows = 7, cols = 7, geo_n = 30, band = 10, count = 20;
  double jitter = 0.15, radius = 0.3, scale = 1.0, noise = 0.05;

  auto* cmd_transform = app.add_subcommand("transform", "forward transform of a signal");
  cmd_transform->fallthrough();
  cmd_transform->add_option("--spec", spec_path, "distribution spec JSON")->required();
  cmd_transform->add_option("--signal", signal_path, "signals CSV")->required();
  cmd_transform->add_option("--row", row, "signal row to use (default 0)");

  auto* cmd_filter = app.add_subcommand("filter", "apply a convolution filter");
  cmd_filter->fallthrough();
  cmd_filter->add_option("--spec", spec_path, "distribution spec JSON")->required();
  cmd_filter->add_option("--signal", signal_path, "signals CSV")->required();
  cmd_filter->add_option("--kernel", kernel_arg, "allpass | lambda | kernel JSON file");
  cmd_filter->add_option("--row", row, "signal row to use (default 0)");

  auto* cmd_bandpass = app.add_subcommand("bandpass", "build or apply a band-pass filter");
  cmd_bandpass->fallthrough();
  cmd_bandpass->add_option("--spec", spec_path, "distribution spec JSON")->required();
  cmd_bandpass->add_option("--bottom", bottom, "band width m (indices 1..m)")->required();
  cmd_bandpass->add_option("--signal", signal_path, "signals CSV (apply instead of emit matrix)");
  cmd_bandpass->add_option("--row", row, "signal row to use (default 0)");

  auto* cmd_sample = app.add_subcommand("sample", "uniqueness-set sampling and reconstruction");
  cmd_sample->fallthrough();
  cmd_sample->add_option("--spec", spec_path, "distribution spec JSON")->required();
  cmd_sample->add_option("--signal", signal_path, "signals CSV")->required();
  cmd_sample->add_option("--bottom", bottom, "band width m for B_Y")->required();
  cmd_sample->add_option("--budget", budget, "number of samples");
  cmd_sample->add_option("--threshold", threshold, "discard eigenvalues <= threshold");
  cmd_sample->add_option("--epsilon", epsilon, "noise level (default: residual of the signal)");
  cmd_sample->add_option("--row", row, "signal row to use (default 0)");

  auto* cmd_basechange = app.add_subcommand("basechange", "pullback filters along a base map");
  cmd_basechange->fallthrough();
  cmd_basechange->add_option("--spec", spec_path, "source distribution spec JSON")->required();
  cmd_basechange->add_option("--map", map_path, "base map JSON")->required();
  cmd_basechange->add_option("--kernel", kernel_arg, "allpass | lambda | kernel JSON file");
  cmd_basechange->add_option("--mode", mode, "fibers (F_{G,h*}) or kernel (F_{G^h})")
      ->check(CLI::IsMember({"fibers", "kernel"}));
  cmd_basechange->add_option("--target", target_path, "target spec JSON (discrete maps)");
  cmd_basechange->add_option("--signal", signal_path, "signals CSV (apply instead of emit matrix)");
  cmd_basechange->add_option("--row", row, "signal row to use (default 0)");

  auto* cmd_learn = app.add_subcommand("learn", "Gibbs posterior over candidate operators");
  cmd_learn->fallthrough();

  auto* cmd_experiment = app.add_subcommand("experiment", "end-to-end pipelines");
  cmd_experiment->fallthrough();
  cmd_experiment->add_option("--pipeline", pipeline, "sampling | anomaly | spectra | stretch_demo")
      ->check(CLI::IsMember({"sampling", "anomaly", "spectra", "stretch_demo"}));

  auto* cmd_synth = app.add_subcommand("synth", "generate synthetic graphs and signals");
  cmd_synth->fallthrough();
  cmd_synth->add_option("--graph", graph_kind, "lattice | geometric")
      ->check(CLI::IsMember({"lattice", "geometric"}));
  cmd_synth->add_option("--rows", rows, "lattice rows");
  cmd_synth->add_option("--cols", cols, "lattice cols");
  cmd_synth->add_option("--jitter", jitter, "coordinate jitter");
  cmd_synth->add_option("--n", geo_n, "geometric graph size");
  cmd_synth->add_option("--radius", radius, "geometric connection radius");
  cmd_synth->add_option("--model", signal_model, "bandlimited | random")
      ->check(CLI::IsMember({"bandlimited", "random"}));
  cmd_synth->add_option("--band", band, "bandlimited: number of low eigenvectors");
  cmd_synth->add_option("--scale", scale, "coefficient scale");
  cmd_synth->add_option("--noise", noise, "additive Gaussian noise sigma");
  cmd_synth->add_option("--count", count, "number of signals");

  auto* cmd_spectra = app.add_subcommand("spectra", "coefficient heatmap exports");
  cmd_spectra->fallthrough();
  cmd_spectra->add_option("--spec", spec_path, "distribution spec JSON (single export)");
  cmd_spectra->add_option("--signal", signal_path, "signals CSV (single export)");
  cmd_spectra->add_option("--rows", rows, "scenario lattice rows");
  cmd_spectra->add_option("--cols", cols, "scenario lattice cols");
  cmd_spectra->add_option("--row", row, "signal row to use (default 0)");

  try {
    app.parse(argc, argv);

    if (*cmd_transform) {
      const auto spec = dgsp::io::read_distribution_spec(spec_path);
      const auto sf = dgsp::io::read_signals_csv(signal_path);
      const auto ens = dgsp::compile(spec, sf.vertex_set);
      const auto coeffs = dgsp::forward(pick_row(sf, row), ens);
      const fs::path path = out_or(out, "coefficients.csv");
      dgsp::io::write_spectral_csv(path, coeffs);
      note(path);
    } else if (*cmd_filter) {
      const auto spec = dgsp::io::read_distribution_spec(spec_path);
      const auto sf = dgsp::io::read_signals_csv(signal_path);
      const auto ens = dgsp::compile(spec, sf.vertex_set);
      const auto kernel = dgsp::io::make_kernel(kernel_from_arg(kernel_arg), ens);
      const auto filter = dgsp::convolution_matrix(kernel, ens);
      const dgsp::Signal g = filter.apply(pick_row(sf, row));
      const fs::path path = out_or(out, "filtered.csv");
      dgsp::io::write_signals_csv(path, {g});
      note(path);
    } else if (*cmd_bandpass) {
      const auto spec = dgsp::io::read_distribution_spec(spec_path);
      if (signal_path.empty()) {
        const auto ens = dgsp::compile(spec);
        const auto B = dgsp::band_pass(dgsp::BandSpec::bottom(bottom), ens);
        const fs::path path = out_or(out, "bandpass_matrix.csv");
        dgsp::io::write_matrix_csv(path, B.matrix);
        note(path);
      } else {
        const auto sf = dgsp::io::read_signals_csv(signal_path);
        const auto ens = dgsp::compile(spec, sf.vertex_set);
        const auto B = dgsp::band_pass(dgsp::BandSpec::bottom(bottom), ens);
        const dgsp::Signal f = pick_row(sf, row);
        const fs::path path = out_or(out, "bandpassed.csv");
        dgsp::io::write_signals_csv(path, {B.apply(f)});
        note(path);
        std::cout << "residual " << dgsp::io::fmt(dgsp::bandlimit_residual(f, B)) << "\n";
      }
    } else if (*cmd_sample) {
      if ((budget > 0) == (threshold >= 0.0))
        throw dgsp::ParseError("sample: give exactly one of --budget or --threshold");
      const auto spec = dgsp::io::read_distribution_spec(spec_path);
      const auto sf = dgsp::io::read_signals_csv(signal_path);
      const auto ens = dgsp::compile(spec, sf.vertex_set);
      const auto B = dgsp::band_pass(dgsp::BandSpec::bottom(bottom), ens);
      const auto cut = budget > 0 ? dgsp::CutRule::by_budget(budget)
                                  : dgsp::CutRule::by_threshold(threshold);
      const auto plan = dgsp::plan(dgsp::analyze(B), cut);
      const dgsp::Signal f = pick_row(sf, row);
      const double eps = epsilon >= 0.0 ? epsilon : dgsp::bandlimit_residual(f, B);
      const auto samples = dgsp::take_samples(plan, f);
      const auto rep = dgsp::reconstruct(plan, samples, eps, f.vertex_set);
      const fs::path dir = out_or(out, ".");
      dgsp::io::write_plan_json(dir / "plan.json", plan);
      dgsp::io::write_samples_csv(dir / "samples.csv", samples);
      dgsp::io::write_signals_csv(dir / "reconstruction.csv", {rep.f_prime});
      note(dir / "plan.json");
      note(dir / "samples.csv");
      note(dir / "reconstruction.csv");
      std::cout << "j " << rep.j << "\nsigma_j " << dgsp::io::fmt(plan.sigma_j) << "\nlambda_j "
                << dgsp::io::fmt(plan.lambda_j) << "\nepsilon " << dgsp::io::fmt(eps)
                << "\nerror_bound " << dgsp::io::fmt(rep.bound_a) << "\nresidual_bound "
                << dgsp::io::fmt(rep.epsilon_prime) << "\nrecovery_error "
                << dgsp::io::fmt((rep.f_prime.values - f.values).norm()) << "\n";
    } else if (*cmd_basechange) {
      const auto spec = dgsp::io::read_distribution_spec(spec_path);
      const auto h = dgsp::io::read_basemap_json(map_path);
      std::shared_ptr<const dgsp::VertexSet> vs;
      dgsp::io::SignalFile sf;
      if (!signal_path.empty()) {
        sf = dgsp::io::read_signals_csv(signal_path);
        vs = sf.vertex_set;
      }
      const auto Y = dgsp::compile(spec, vs);
      auto ks = kernel_from_arg(kernel_arg);
      Eigen::MatrixXd matrix;
      if (h.kind() == dgsp::BaseMap::Kind::Discrete) {
        if (target_path.empty())
          throw dgsp::ParseError("basechange: discrete maps need --target");
        const auto X = dgsp::compile(dgsp::io::read_distribution_spec(target_path), vs);
        const auto kernel = dgsp::io::make_kernel(ks, X);
        matrix = mode == "fibers" ? dgsp::pullback_filter_via_fibers(kernel, h, Y, X)
                                  : dgsp::pullback_kernel_filter(kernel, h, Y, X);
      } else {
        if (spec.variant() != dgsp::DistributionSpec::Variant::IntervalFamilyV)
          throw dgsp::ParseError("basechange: parameter maps need an interval_family spec");
        const dgsp::IntervalFamily family{spec.operators()[0], spec.operators()[1]};
        if (ks.kind == dgsp::io::KernelSpec::Kind::AllPass) {
          ks.kind = dgsp::io::KernelSpec::Kind::Band;
          ks.bottom = Y.vertex_count();
        }
        const auto kernel = dgsp::io::make_kernel(ks, Y);
        matrix = mode == "fibers" ? dgsp::pullback_filter_via_fibers(kernel, h, Y, family)
                                  : dgsp::pullback_kernel_filter(kernel, h, Y, family);
      }
      if (signal_path.empty()) {
        const fs::path path = out_or(out, "basechange_matrix.csv");
        dgsp::io::write_matrix_csv(path, matrix);
        note(path);
      } else {
        const dgsp::Signal f = pick_row(sf, row);
        const fs::path path = out_or(out, "basechanged.csv");
        dgsp::io::write_signals_csv(path, {dgsp::Signal(f.vertex_set, matrix * f.values)});
        note(path);
      }
    } else if (*cmd_learn) {
      if (config.empty()) throw dgsp::ParseError("learn: --config is required");
      const auto cfg = dgsp::io::read_learn_config(config);
      const auto candidates = dgsp::io::build_candidates(cfg);
      dgsp::TrainingSet train = [&] {
        if (cfg.loss.kind == dgsp::LossSpec::Kind::Custom) {
          const auto vs = dgsp::VertexSet::make(candidates.front().size());
          std::vector<dgsp::Signal> dummies(
              static_cast<std::size_t>(cfg.loss.losses.cols()),
              dgsp::Signal(vs, Eigen::VectorXd::Zero(vs->n)));
          return dgsp::TrainingSet::make(std::move(dummies));
        }
        if (cfg.signals_file.empty())
          throw dgsp::ParseError("learn: config needs a 'signals' file for this loss");
        const auto sf = dgsp::io::read_signals_csv(cfg.signals_file);
        return dgsp::TrainingSet::make(sf.signals(), cfg.labels);
      }();
      const auto risks = dgsp::empirical_risk(candidates, train, cfg.loss);
      const auto posterior = dgsp::gibbs_exact(risks, cfg.gibbs);
      nlohmann::json result;
      result["weights"] = posterior;
      result["risks"] = risks.risks;
      result["method"] = "gibbs_exact";
      if (cfg.mh) {
        dgsp::MHConfig mh = *cfg.mh;
        if (app.count("--seed")) mh.seed = seed;
        const auto mhr = dgsp::mh_sample(risks, cfg.gibbs, mh);
        result["mh_frequencies"] = mhr.frequencies;
        result["acceptance_rate"] = mhr.acceptance_rate;
        result["method"] = "gibbs_exact+mh";
      }
      const fs::path dir = out_or(out, ".");
      dgsp::io::atomic_write(dir / "learn_result.json", result.dump(2) + "\n");
      note(dir / "learn_result.json");
      std::vector<dgsp::SymOperator> kept_ops;
      std::vector<double> kept_w;
      for (std::size_t c = 0; c < candidates.size(); ++c)
        if (posterior[c] > 0.0) {
          kept_ops.push_back(candidates[c]);
          kept_w.push_back(posterior[c]);
        }
      dgsp::io::write_discrete_distribution(dir / "learned_distribution.json", kept_ops, kept_w);
      note(dir / "learned_distribution.json");
    } else if (*cmd_experiment) {
      dgsp::experiment::ExperimentConfig cfg;
      if (!config.empty()) {
        cfg = dgsp::experiment::read_experiment_config(config);
      } else {
        using P = dgsp::experiment::ExperimentConfig::Pipeline;
        cfg.pipeline = pipeline == "sampling"     ? P::Sampling
                       : pipeline == "anomaly"    ? P::Anomaly
                       : pipeline == "spectra"    ? P::Spectra
                                                  : P::StretchDemo;
      }
      if (app.count("--seed")) cfg.seed = seed;
      if (!out.empty()) cfg.out_dir = out;
      using P = dgsp::experiment::ExperimentConfig::Pipeline;
      switch (cfg.pipeline) {
        case P::Sampling: {
          const auto table = dgsp::experiment::run_sampling_experiment(cfg);
          note(table.csv_path);
          break;
        }
        case P::Anomaly: {
          const auto table = dgsp::experiment::run_anomaly_experiment(cfg);
          note(table.csv_path);
          break;
        }
        case P::Spectra: {
          for (const auto& path : dgsp::experiment::run_spectra_scenarios(cfg)) note(path);
          break;
        }
        case P::StretchDemo: {
          dgsp::experiment::run_stretch_demo(cfg);
          note(cfg.out_dir / "stretch_summary.json");
          break;
        }
      }
    } else if (*cmd_synth) {
      std::mt19937_64 gen(seed);
      std::vector<std::vector<double>> coords;
      dgsp::EdgeList edges;
      if (graph_kind == "lattice") {
        coords = dgsp::synth::lattice_coords(rows, cols, jitter, &gen);
        edges = dgsp::synth::lattice_edges(rows, cols);
      } else {
        auto g = dgsp::synth::random_geometric(geo_n, radius, gen);
        coords = std::move(g.coords);
        edges = std::move(g.edges);
      }
      const auto n = static_cast<dgsp::Index>(coords.size());
      const auto L = dgsp::laplacian_from_edges(edges, n, "synthetic");
      const Eigen::MatrixXd signals =
          signal_model == "bandlimited"
              ? dgsp::synth::bandlimited_signals(L, band, scale, noise, count, gen)
              : dgsp::synth::random_signals(n, scale, count, gen);
      const fs::path dir = out_or(out, ".");
      dgsp::io::write_edges_csv(dir / "edges.csv", edges);
      dgsp::io::write_coords_csv(dir / "coords.csv", coords);
      dgsp::io::write_matrix_csv(dir / "laplacian.csv", L.matrix());
      dgsp::io::write_signals_csv(dir / "signals.csv", dgsp::VertexSet::make(n), signals);
      note(dir / "edges.csv");
      note(dir / "coords.csv");
      note(dir / "laplacian.csv");
      note(dir / "signals.csv");
    } else if (*cmd_spectra) {
      if (!spec_path.empty() || !signal_path.empty()) {
        if (spec_path.empty() || signal_path.empty())
          throw dgsp::ParseError("spectra: single export needs both --spec and --signal");
        const auto spec = dgsp::io::read_distribution_spec(spec_path);
        const auto sf = dgsp::io::read_signals_csv(signal_path);
        const fs::path path = out_or(out, "spectra.csv");
        dgsp::experiment::export_spectra(path, pick_row(sf, row), spec);
        note(path);
      } else {
        dgsp::experiment::ExperimentConfig cfg;
        cfg.pipeline = dgsp::experiment::ExperimentConfig::Pipeline::Spectra;
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.seed = seed;
        cfg.out_dir = out_or(out, ".");
        for (const auto& path : dgsp::experiment::run_spectra_scenarios(cfg)) note(path);
      }
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const dgsp::ParseError& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 2;
  } catch (const dgsp::DimensionError& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 3;
  } catch (const dgsp::NumericalError& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 4;
  } catch (const dgsp::CertificateError& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 5;
  } catch (const std::invalid_argument& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dgsp: " << e.what() << "\n";
    return 1;
  }
}
