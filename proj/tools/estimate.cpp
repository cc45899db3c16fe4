// Experiment runner: wires states, observables, and measurement schemes into
// reproducible CSV/JSON outputs. Every subcommand is a pure function of its
// flags and --seed; identical invocations emit identical bytes.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bosonmeter/cv_apps.hpp"
#include "bosonmeter/experiments.hpp"
#include "bosonmeter/io.hpp"
#include "bosonmeter/shadow.hpp"

using namespace bosonmeter;

namespace {

// Specs the machinery cannot run (as opposed to specs it cannot parse).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  long long shots = 1000;
  int repetitions = 10;
  std::uint64_t seed = 1;
  std::string output;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--T", c.shots, "samples per repetition")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--R", c.repetitions, "repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", c.seed, "master seed; outputs are a pure function of it")->capture_default_str();
  cmd->add_option("--output", c.output, "write to this file instead of stdout");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

int env_threads(int reps) {
  const char* v = std::getenv("BOSON_METER_THREADS");
  if (!v) return 1;
  const int t = std::atoi(v);
  return std::max(1, std::min(t, reps));
}

SchemeKind parse_scheme(const std::string& s) {
  if (s == "cs") return SchemeKind::cs_uniform;
  if (s == "l1") return SchemeKind::importance_l1;
  return SchemeKind::ogm;
}

struct Row {
  std::string experiment;
  std::string param;
  int rep = 0;
  double estimate = 0.0;
  std::optional<double> exact;
  std::optional<double> bound;
};

void emit(const CommonOpts& c, const std::vector<Row>& rows, const nlohmann::json& summary) {
  std::string text;
  if (c.format == "csv") {
    CsvWriter w({"experiment", "param", "rep", "estimate", "exact", "bound"});
    for (const Row& r : rows)
      w.row({r.experiment, r.param, std::to_string(r.rep), format_csv_value(r.estimate),
             r.exact ? format_csv_value(*r.exact) : "", r.bound ? format_csv_value(*r.bound) : ""});
    text = w.str();
  } else {
    nlohmann::json j;
    j["format_version"] = 1;
    nlohmann::json jr = nlohmann::json::array();
    for (const Row& r : rows) {
      nlohmann::json e = {{"experiment", r.experiment}, {"param", r.param}, {"rep", r.rep}, {"estimate", r.estimate}};
      if (r.exact) e["exact"] = *r.exact;
      if (r.bound) e["bound"] = *r.bound;
      jr.push_back(e);
    }
    j["rows"] = jr;
    j["summary"] = summary;
    text = j.dump(2) + "\n";
  }
  if (c.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(c.output);
    if (!out) throw std::runtime_error("cannot open " + c.output + " for writing");
    out << text;
  }
}

nlohmann::json report_summary(const EstimationReport& rep, const CommonOpts& c, const std::string& scheme,
                              const std::string& basis) {
  nlohmann::json j;
  j["mean"] = rep.mean;
  j["std_across_reps"] = rep.std_across_reps;
  j["shot_variance"] = rep.shot_variance;
  j["shots_per_rep"] = rep.shots_per_rep;
  j["repetitions"] = rep.repetitions;
  j["seed"] = c.seed;
  j["scheme"] = {{"kind", scheme}, {"basis", basis}};
  return j;
}

void append_reps(std::vector<Row>& rows, const std::string& experiment, const std::string& param,
                 const EstimationReport& rep, std::optional<double> exact, std::optional<double> bound) {
  for (int r = 0; r < static_cast<int>(rep.rep_means.size()); ++r)
    rows.push_back(Row{experiment, param, r, rep.rep_means[r], exact, bound});
}

// ---------------------------------------------------------------------------
// qudit / qudit-cs

struct QuditArgs {
  int d = 3;
  std::string scheme = "ogm";
  std::string hamiltonian;
  std::string observable;
  std::string state = "ground";
  std::string state_file;
};

void add_qudit(CLI::App* cmd, QuditArgs& a, bool shadows) {
  cmd->add_option("--d", a.d, "local dimension")->check(CLI::Range(2, 64))->capture_default_str();
  if (!shadows)
    cmd->add_option("--scheme", a.scheme, "measurement scheme")
        ->check(CLI::IsMember({"cs", "l1", "ogm"}))
        ->capture_default_str();
  cmd->add_option("--hamiltonian", a.hamiltonian, "vibrational-config JSON; decomposed into basis strings");
  cmd->add_option("--observable", a.observable, "observable JSON (ggb kind)");
  cmd->add_option("--state", a.state, "state preparation")
      ->check(CLI::IsMember({"ground", "ghz", "file"}))
      ->capture_default_str();
  cmd->add_option("--state-file", a.state_file, "qudit state JSON for --state file");
}

void run_qudit(const QuditArgs& a, const CommonOpts& c, bool shadows) {
  Observable o;
  MatrixXcd h;
  bool have_h = false;
  int n = 0, d = a.d;

  if (!a.observable.empty()) {
    o = observable_from_json(load_json_file(a.observable));
    if (o.basis != Basis::ggb) throw std::runtime_error("qudit runs need a ggb-kind observable");
    n = o.n;
    d = o.d;
  }
  if (!a.hamiltonian.empty()) {
    const VibrationalConfig cfg = vibrational_config_from_json(load_json_file(a.hamiltonian));
    const int hn = static_cast<int>(cfg.frequencies.size());
    if (!a.observable.empty() && hn != n)
      throw std::runtime_error("--hamiltonian mode count disagrees with --observable");
    n = hn;
    try {
      hilbert_dim(n, d);
    } catch (const std::exception& e) {
      throw InfeasibleError(e.what());
    }
    h = build_vibrational_hamiltonian(cfg, d);
    have_h = true;
    if (a.observable.empty()) o = decompose_ggb(h, n, d);
  }
  if (o.terms.empty()) throw std::runtime_error("provide --hamiltonian and/or --observable");
  try {
    hilbert_dim(n, d);
  } catch (const std::exception& e) {
    throw InfeasibleError(e.what());
  }
  if (shadows && !is_odd_prime(d)) throw InfeasibleError("classical shadows require an odd prime local dimension");

  QuditState psi;
  if (a.state == "ground") {
    if (!have_h) throw std::runtime_error("--state ground needs --hamiltonian");
    psi = ground_state(h, n, d);
  } else if (a.state == "ghz") {
    psi = ghz_state(n, d);
  } else {
    if (a.state_file.empty()) throw std::runtime_error("--state file needs --state-file");
    psi = qudit_state_from_json(load_json_file(a.state_file));
    if (psi.n != n || psi.d != d) throw std::runtime_error("--state-file shape disagrees with the observable");
  }

  const double exact = exact_expectation(psi, o);
  std::vector<Row> rows;
  nlohmann::json summary;

  if (shadows) {
    Rng base(c.seed);
    std::vector<double> means(c.repetitions);
    double grand = 0.0, pooled = 0.0;
    for (int r = 0; r < c.repetitions; ++r) {
      Rng rng = base.derive(static_cast<std::uint64_t>(r));
      const ShadowReport rep = shadow_estimate(o, psi, static_cast<std::size_t>(c.shots), rng);
      means[r] = rep.mean;
      grand += rep.mean;
      pooled += rep.variance;
      rows.push_back(Row{"qudit-cs", "shadow", r, rep.mean, exact, std::nullopt});
    }
    EstimationReport rep;
    rep.rep_means = means;
    rep.mean = grand / c.repetitions;
    rep.shot_variance = pooled / c.repetitions;
    rep.shots_per_rep = c.shots;
    rep.repetitions = c.repetitions;
    if (c.repetitions > 1) {
      double ss = 0.0;
      for (double m : means) ss += (m - rep.mean) * (m - rep.mean);
      rep.std_across_reps = std::sqrt(ss / (c.repetitions - 1));
    }
    summary = report_summary(rep, c, "shadow", "ggb");
    summary["exact"] = exact;
    summary["rms_error"] = rms_error(rep, exact);
  } else {
    EstimateOptions opts;
    opts.shots = c.shots;
    opts.repetitions = c.repetitions;
    opts.seed = c.seed;
    opts.threads = env_threads(c.repetitions);
    const long long dim = hilbert_dim(n, d);
    RunFlags flags;
    flags.with_exact_variance = dim <= 2048 && o.terms.size() <= 200;
    flags.with_bound = a.scheme == "cs" && dim <= 1024;
    const SchemeRun run = run_qudit_scheme(o, psi, parse_scheme(a.scheme), opts, flags);
    const std::optional<double> bound =
        flags.with_bound ? std::optional<double>(run.variance_bound) : std::nullopt;
    append_reps(rows, "qudit", a.scheme, run.report, exact, bound);
    summary = report_summary(run.report, c, a.scheme, "ggb");
    summary["exact"] = run.exact;
    if (flags.with_exact_variance) summary["exact_variance"] = run.exact_variance;
    if (bound) summary["variance_bound"] = *bound;
    summary["rms_error"] = rms_error(run.report, run.exact);
  }
  emit(c, rows, summary);
}

// ---------------------------------------------------------------------------
// Continuous-variable runners

struct CvArgs {
  int n = 2;
  int M = 20;
  int K = 2;
  int weight = 0;  // 0 -> min(K, n)
  bool multilinear = false;
  double r = 1.0;
  std::string scheme = "cs";
  double B = 0.0;
  double noise_sigma = 0.1;
  double noise_bound = 0.0;
  int states = 1;
  double trace_norm = 0.0;  // 0 -> 2n
  std::string schemes = "cs,l1,ogm";
};

void add_generator(CLI::App* cmd, CvArgs& a) {
  cmd->add_option("--n", a.n, "modes")->check(CLI::Range(1, 64))->capture_default_str();
  cmd->add_option("--M", a.M, "random terms per observable")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--K", a.K, "term degree")->check(CLI::Range(1, 12))->capture_default_str();
  cmd->add_option("--weight", a.weight, "support size per term (0 = min(K, n))")->capture_default_str();
  cmd->add_flag("--multilinear", a.multilinear, "force exponent 1 per supported mode");
}

void add_scheme_opt(CLI::App* cmd, CvArgs& a) {
  cmd->add_option("--scheme", a.scheme, "measurement scheme")
      ->check(CLI::IsMember({"cs", "l1", "ogm"}))
      ->capture_default_str();
}

void add_projection(CLI::App* cmd, CvArgs& a) {
  cmd->add_option("--B", a.B, "detector range; outcomes are clipped into [-B, B]")->capture_default_str();
}

Observable draw_observable(const CvArgs& a, Rng& gen) {
  const int w = a.weight > 0 ? a.weight : std::min(a.K, a.n);
  return random_px_observable(a.n, a.M, w, a.K, gen, a.multilinear);
}

EstimateOptions cv_options(const CvArgs& a, const CommonOpts& c, std::uint64_t seed) {
  EstimateOptions opts;
  opts.shots = c.shots;
  opts.repetitions = c.repetitions;
  opts.seed = seed;
  opts.threads = env_threads(c.repetitions);
  if (a.B > 0.0) opts.projection.bound = a.B;
  return opts;
}

// Exact estimator variance is an O(M^2) pair-moment sweep; keep it to sizes
// where that stays instant.
bool cv_variance_feasible(const Observable& o) { return o.terms.size() <= 64; }

void run_cv_fixed_state(const std::string& experiment, const std::string& param, const Observable& o,
                        const GaussianState& state, const CvArgs& a, const CommonOpts& c) {
  EstimateOptions opts = cv_options(a, c, c.seed);
  RunFlags flags;
  flags.with_exact_variance = cv_variance_feasible(o);
  flags.with_bound = a.scheme == "cs" && opts.projection.enabled();
  const SchemeRun run = run_px_scheme(o, state, parse_scheme(a.scheme), opts, flags);
  const std::optional<double> bound = flags.with_bound ? std::optional<double>(run.variance_bound) : std::nullopt;

  std::vector<Row> rows;
  append_reps(rows, experiment, param, run.report, run.exact, bound);
  nlohmann::json summary = report_summary(run.report, c, a.scheme, "px");
  summary["exact"] = run.exact;
  summary["rms_error"] = rms_error(run.report, run.exact);
  if (flags.with_exact_variance) summary["exact_variance"] = run.exact_variance;
  if (bound) summary["variance_bound"] = *bound;
  emit(c, rows, summary);
}

void run_cv_tmsv(const CvArgs& a, const CommonOpts& c) {
  const Observable o = mean_photon_observable(2);
  const GaussianState state = tmsv_state(a.r);
  std::ostringstream p;
  p << "r=" << a.r;
  run_cv_fixed_state("cv-tmsv", p.str(), o, state, a, c);
}

void run_cv_squeezed(const CvArgs& a, const CommonOpts& c) {
  Rng gen(Rng(c.seed).derive(17).seed());
  const Observable o = draw_observable(a, gen);
  const GaussianState state = equal_squeezed_state(a.n, a.r);
  std::ostringstream p;
  p << "r=" << a.r << ";K=" << a.K;
  run_cv_fixed_state("cv-squeezed", p.str(), o, state, a, c);
}

void run_cv_random(const CvArgs& a, const CommonOpts& c) {
  const double trace = a.trace_norm > 0.0 ? a.trace_norm : 2.0 * a.n;
  std::vector<Row> rows;
  nlohmann::json states = nlohmann::json::array();
  Rng gen(Rng(c.seed).derive(23).seed());
  for (int s = 0; s < a.states; ++s) {
    const Observable o = draw_observable(a, gen);
    const GaussianState state = random_gaussian_state(a.n, Rng(c.seed).derive(101 + s).seed(), trace);
    EstimateOptions opts = cv_options(a, c, Rng(c.seed).derive(301 + s).seed());
    RunFlags flags;
    flags.with_exact_variance = cv_variance_feasible(o);
    flags.with_bound = a.scheme == "cs" && opts.projection.enabled();
    const SchemeRun run = run_px_scheme(o, state, parse_scheme(a.scheme), opts, flags);
    std::ostringstream p;
    p << "K=" << a.K << ";state=" << s;
    const std::optional<double> bound = flags.with_bound ? std::optional<double>(run.variance_bound) : std::nullopt;
    append_reps(rows, "cv-random", p.str(), run.report, run.exact, bound);
    nlohmann::json js = report_summary(run.report, c, a.scheme, "px");
    js["state"] = s;
    js["exact"] = run.exact;
    js["rms_error"] = rms_error(run.report, run.exact);
    if (flags.with_exact_variance) js["exact_variance"] = run.exact_variance;
    states.push_back(js);
  }
  nlohmann::json summary;
  summary["seed"] = c.seed;
  summary["K"] = a.K;
  summary["states"] = states;
  emit(c, rows, summary);
}

void run_cv_noise(const CvArgs& a, const CommonOpts& c) {
  Rng gen(Rng(c.seed).derive(29).seed());
  CvArgs ml = a;
  ml.multilinear = true;  // keeps the second-order noise correction exact
  const Observable o = draw_observable(ml, gen);
  const GaussianState state = a.r != 0.0 ? equal_squeezed_state(a.n, a.r) : vacuum_state(a.n);
  NoiseModel noise;
  noise.sigma = a.noise_sigma;
  noise.bound = a.noise_bound;

  EstimateOptions opts = cv_options(a, c, c.seed);
  opts.noise = noise;
  const MeasurementScheme scheme = make_scheme(o, parse_scheme(a.scheme));
  QuadratureSampler sampler(state);
  const EstimationReport report = estimate(o, scheme, sampler, opts);
  const double exact = expectation(state, o);

  std::vector<Row> rows;
  std::ostringstream p;
  p << "sigma=" << a.noise_sigma;
  std::optional<double> bound;
  if (a.B > 0.0)
    bound = px_cs_variance_bound_per_term(o, opts.projection) + noise_variance_bound(o, a.B, noise.effective_bound());
  append_reps(rows, "cv-noise", p.str(), report, exact, bound);

  nlohmann::json summary = report_summary(report, c, a.scheme, "px");
  summary["exact"] = exact;
  summary["rms_error"] = rms_error(report, exact);
  summary["noise_sigma"] = noise.sigma;
  summary["noise_bound"] = noise.effective_bound();
  summary["noise_outcome_variance"] = noise_outcome_variance(noise);
  if (cv_variance_feasible(o)) {
    const double vo = exact_variance_px(o, scheme, state);
    const double ve = noise_extra_variance(o, scheme, state, noise);
    summary["exact_variance"] = vo;
    summary["noise_extra_variance"] = ve;
    summary["predicted_total_variance"] = vo + ve;
  }
  if (bound) summary["variance_bound"] = *bound;
  emit(c, rows, summary);
}

void run_cv_separable(const CvArgs& a, const CommonOpts& c) {
  // O = sum_i p_i^2/2 + x_i^2/2: the harmonic energy, split into a momentum
  // polynomial U and a position polynomial V measured in two settings.
  SeparableSpec spec;
  spec.u.basis = Basis::px;
  spec.u.n = a.n;
  spec.v.basis = Basis::px;
  spec.v.n = a.n;
  for (int i = 0; i < a.n; ++i) {
    Term tu, tv;
    tu.px.assign(a.n, PXExp{0, 0});
    tv.px.assign(a.n, PXExp{0, 0});
    tu.px[i].m = 2;
    tv.px[i].l = 2;
    tu.coeff = tv.coeff = 0.5;
    spec.u.terms.push_back(tu);
    spec.v.terms.push_back(tv);
  }
  spec.box_bound = a.B > 0.0 ? a.B : 4.0;
  spec.norm_u = box_sup_norm(spec.u, spec.box_bound);
  spec.norm_v = box_sup_norm(spec.v, spec.box_bound);

  const GaussianState state = a.r != 0.0 ? equal_squeezed_state(a.n, a.r) : vacuum_state(a.n);
  const EstimationReport report = separable_estimate(spec, state, c.shots, c.repetitions, c.seed);
  const double exact = expectation(state, spec.u) + expectation(state, spec.v);
  const double bound = separable_variance_bound(spec);

  std::vector<Row> rows;
  std::ostringstream p;
  p << "B=" << spec.box_bound;
  append_reps(rows, "cv-separable", p.str(), report, exact, bound);
  nlohmann::json summary = report_summary(report, c, "separable", "px");
  summary["exact"] = exact;
  summary["rms_error"] = rms_error(report, exact);
  summary["norm_u"] = spec.norm_u;
  summary["norm_v"] = spec.norm_v;
  summary["variance_bound"] = bound;
  emit(c, rows, summary);
}

void run_compare(const CvArgs& a, const CommonOpts& c) {
  std::vector<std::string> kinds;
  std::stringstream ss(a.schemes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item != "cs" && item != "l1" && item != "ogm")
      throw std::runtime_error("--schemes entries must be cs, l1, or ogm");
    kinds.push_back(item);
  }
  if (kinds.empty()) throw std::runtime_error("--schemes is empty");

  // All schemes see the same observable, state, and estimation seed, so the
  // comparison is paired by construction.
  Rng gen(Rng(c.seed).derive(37).seed());
  const Observable o = draw_observable(a, gen);
  const GaussianState state = a.r != 0.0 ? equal_squeezed_state(a.n, a.r)
                                         : random_gaussian_state(a.n, Rng(c.seed).derive(41).seed(),
                                                                 a.trace_norm > 0.0 ? a.trace_norm : 2.0 * a.n);
  std::vector<Row> rows;
  nlohmann::json per_scheme = nlohmann::json::array();
  for (const std::string& kind : kinds) {
    EstimateOptions opts = cv_options(a, c, c.seed);
    RunFlags flags;
    flags.with_exact_variance = cv_variance_feasible(o);
    const SchemeRun run = run_px_scheme(o, state, parse_scheme(kind), opts, flags);
    append_reps(rows, "compare", kind, run.report, run.exact, std::nullopt);
    nlohmann::json js;
    js["scheme"] = kind;
    js["mean"] = run.report.mean;
    js["rms_error"] = rms_error(run.report, run.exact);
    js["shot_variance"] = run.report.shot_variance;
    if (flags.with_exact_variance) js["exact_variance"] = run.exact_variance;
    per_scheme.push_back(js);
  }
  nlohmann::json summary;
  summary["seed"] = c.seed;
  summary["exact"] = expectation(state, o);
  summary["schemes"] = per_scheme;
  emit(c, rows, summary);
}

// ---------------------------------------------------------------------------
// purity / shift

struct PurityArgs {
  int n = 1;
  double r = 0.0;
  double shift_mean = 0.0;
  double shift_std = 0.0;
  int degree = 4;
  bool exact_symbol = false;
};

void run_purity(const PurityArgs& a, const CommonOpts& c) {
  const GaussianState reference = a.r != 0.0 ? equal_squeezed_state(a.n, a.r) : vacuum_state(a.n);
  GaussianState state = reference;
  if (a.shift_mean != 0.0 || a.shift_std != 0.0) apply_shift_channel(state, 0, a.shift_mean, a.shift_std);

  PurityOptions opt;
  opt.degree = a.degree;
  opt.exact_symbol = a.exact_symbol;
  opt.shots = c.shots;
  opt.repetitions = c.repetitions;
  opt.seed = c.seed;
  const PurityReport rep = estimate_purity(reference, state, opt);

  std::vector<Row> rows;
  std::ostringstream p;
  if (a.exact_symbol)
    p << "symbol=exact";
  else
    p << "degree=" << a.degree;
  for (int r = 0; r < static_cast<int>(rep.rep_means.size()); ++r)
    rows.push_back(Row{"purity", p.str(), r, rep.rep_means[r], rep.overlap_exact, std::nullopt});

  nlohmann::json summary;
  summary["seed"] = c.seed;
  summary["shots_per_rep"] = c.shots;
  summary["repetitions"] = c.repetitions;
  summary["overlap_mean"] = rep.overlap_mean;
  summary["overlap_std"] = rep.overlap_std;
  summary["overlap_exact"] = rep.overlap_exact;
  summary["overlap_truncated"] = rep.overlap_truncated;
  summary["ref_purity"] = rep.ref_purity;
  summary["purity"] = rep.purity;
  summary["purity_from_exact"] = rep.purity_from_exact;
  emit(c, rows, summary);
}

struct ShiftArgs {
  double shift_mean = 1.5;
  double shift_std = 0.0;
  int k_max = 2;
};

void run_shift(const ShiftArgs& a, const CommonOpts& c) {
  const GaussianState reference = vacuum_state(1);
  GaussianState shifted = reference;
  apply_shift_channel(shifted, 0, a.shift_mean, a.shift_std);
  const ShiftReport rep = estimate_shift_moments(reference, shifted, 0, a.k_max, c.shots, c.seed);

  // Closed-form moments of the injected N(mean, std^2) shift.
  const double mu = a.shift_mean, s2 = a.shift_std * a.shift_std;
  const std::vector<double> exact = {1.0, mu, mu * mu + s2, mu * mu * mu + 3 * mu * s2,
                                     mu * mu * mu * mu + 6 * mu * mu * s2 + 3 * s2 * s2};

  std::vector<Row> rows;
  for (int k = 1; k <= a.k_max; ++k) {
    std::ostringstream p;
    p << "k=" << k;
    rows.push_back(Row{"shift", p.str(), 0, rep.shift_moments[k], exact[k], std::nullopt});
  }
  nlohmann::json summary;
  summary["seed"] = c.seed;
  summary["shots"] = rep.shots;
  summary["mean_shift"] = rep.mean_shift;
  summary["var_shift"] = rep.var_shift;
  summary["raw_moments"] = rep.raw_moments;
  summary["shift_moments"] = rep.shift_moments;
  emit(c, rows, summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measurement-scheme experiment runner"};
  app.require_subcommand(1);

  CommonOpts common;
  QuditArgs qudit_args;
  CvArgs cv_args;
  PurityArgs purity_args;
  ShiftArgs shift_args;

  CLI::App* qudit = app.add_subcommand("qudit", "basis-string schemes on qudit registers");
  add_common(qudit, common);
  add_qudit(qudit, qudit_args, false);

  CLI::App* qudit_cs = app.add_subcommand("qudit-cs", "global Clifford classical shadows (odd prime d)");
  add_common(qudit_cs, common);
  add_qudit(qudit_cs, qudit_args, true);

  CLI::App* cv_tmsv = app.add_subcommand("cv-tmsv", "mean photon number of a two-mode squeezed vacuum");
  add_common(cv_tmsv, common);
  add_scheme_opt(cv_tmsv, cv_args);
  add_projection(cv_tmsv, cv_args);
  cv_tmsv->add_option("--r", cv_args.r, "squeezing parameter")->capture_default_str();

  CLI::App* cv_random = app.add_subcommand("cv-random", "random degree-K observables on random Gaussian states");
  add_common(cv_random, common);
  add_generator(cv_random, cv_args);
  add_scheme_opt(cv_random, cv_args);
  add_projection(cv_random, cv_args);
  cv_random->add_option("--states", cv_args.states, "independent random states")->check(CLI::PositiveNumber)->capture_default_str();
  cv_random->add_option("--trace-norm", cv_args.trace_norm, "covariance trace (0 = 2n)")->capture_default_str();

  CLI::App* cv_squeezed = app.add_subcommand("cv-squeezed", "random observables on an equally squeezed register");
  add_common(cv_squeezed, common);
  add_generator(cv_squeezed, cv_args);
  add_scheme_opt(cv_squeezed, cv_args);
  add_projection(cv_squeezed, cv_args);
  cv_squeezed->add_option("--r", cv_args.r, "squeezing parameter")->capture_default_str();

  CLI::App* cv_noise = app.add_subcommand("cv-noise", "detector noise on multilinear observables");
  add_common(cv_noise, common);
  add_generator(cv_noise, cv_args);
  add_scheme_opt(cv_noise, cv_args);
  add_projection(cv_noise, cv_args);
  cv_noise->add_option("--r", cv_args.r, "squeezing parameter (0 = vacuum)")->default_val(0.0);
  cv_noise->add_option("--noise-sigma", cv_args.noise_sigma, "noise std per measured mode")->capture_default_str();
  cv_noise->add_option("--noise-bound", cv_args.noise_bound, "noise truncation (0 = 5 sigma)")->capture_default_str();

  CLI::App* cv_separable = app.add_subcommand("cv-separable", "two-setting estimator for U(p) + V(x)");
  add_common(cv_separable, common);
  cv_separable->add_option("--n", cv_args.n, "modes")->check(CLI::Range(1, 64))->capture_default_str();
  cv_separable->add_option("--r", cv_args.r, "squeezing parameter (0 = vacuum)")->default_val(0.0);
  cv_separable->add_option("--B", cv_args.B, "detection box half-width (0 = 4)")->capture_default_str();

  CLI::App* purity = app.add_subcommand("purity", "reference-state purity estimation");
  add_common(purity, common);
  purity->add_option("--n", purity_args.n, "modes")->check(CLI::Range(1, 16))->capture_default_str();
  purity->add_option("--r", purity_args.r, "reference squeezing")->capture_default_str();
  purity->add_option("--shift-mean", purity_args.shift_mean, "x shift applied to the probed state")->capture_default_str();
  purity->add_option("--shift-std", purity_args.shift_std, "shift spread applied to the probed state")->capture_default_str();
  purity->add_option("--degree", purity_args.degree, "symbol truncation degree")->check(CLI::IsMember({0, 2, 4}))->capture_default_str();
  purity->add_flag("--exact-symbol", purity_args.exact_symbol, "evaluate the full symbol (unbiased)");

  CLI::App* shift = app.add_subcommand("shift", "position-shift moment recovery");
  add_common(shift, common);
  shift->add_option("--shift-mean", shift_args.shift_mean, "injected shift mean")->capture_default_str();
  shift->add_option("--shift-std", shift_args.shift_std, "injected shift spread")->capture_default_str();
  shift->add_option("--k-max", shift_args.k_max, "highest recovered moment")->check(CLI::Range(1, 4))->capture_default_str();

  CLI::App* compare = app.add_subcommand("compare", "paired scheme comparison on one instance");
  add_common(compare, common);
  add_generator(compare, cv_args);
  add_projection(compare, cv_args);
  compare->add_option("--r", cv_args.r, "squeezing (0 = random state)")->default_val(0.0);
  compare->add_option("--trace-norm", cv_args.trace_norm, "covariance trace for random states (0 = 2n)")->capture_default_str();
  compare->add_option("--schemes", cv_args.schemes, "comma-separated scheme list")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(qudit)) run_qudit(qudit_args, common, false);
    else if (app.got_subcommand(qudit_cs)) run_qudit(qudit_args, common, true);
    else if (app.got_subcommand(cv_tmsv)) run_cv_tmsv(cv_args, common);
    else if (app.got_subcommand(cv_random)) run_cv_random(cv_args, common);
    else if (app.got_subcommand(cv_squeezed)) run_cv_squeezed(cv_args, common);
    else if (app.got_subcommand(cv_noise)) run_cv_noise(cv_args, common);
    else if (app.got_subcommand(cv_separable)) run_cv_separable(cv_args, common);
    else if (app.got_subcommand(purity)) run_purity(purity_args, common);
    else if (app.got_subcommand(shift)) run_shift(shift_args, common);
    else if (app.got_subcommand(compare)) run_compare(cv_args, common);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
