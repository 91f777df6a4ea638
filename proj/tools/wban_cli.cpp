#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wban/bcc_model.hpp"
#include "wban/io/config.hpp"
#include "wban/io/experiment.hpp"
#include "wban/io/synth_trace.hpp"
#include "wban/io/trace_io.hpp"
#include "wban/numerics.hpp"
#include "wban/optimizer.hpp"
#include "wban/rf_model.hpp"
#include "wban/sim/engine.hpp"

namespace fs = std::filesystem;
using namespace wban;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
};

io::RunConfig load_run_config(const Globals& g) { return g.config.empty() ? io::RunConfig{} : io::load_config(g.config); }

std::string config_dir(const Globals& g) { return g.config.empty() ? std::string{} : fs::path(g.config).parent_path().string(); }

// Writes to <out>/<name>, or stdout when no directory was given.
class Sink {
 public:
  Sink(const std::string& dir, const std::string& name) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    path_ = (fs::path(dir) / name).string();
    file_.open(path_);
    if (!file_) throw Error("IO", "cannot write " + path_);
  }
  std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::string path_;
  std::ofstream file_;
};

using io::format_number;

int cmd_model(const Globals& g, const std::string& which) {
  const auto c = load_run_config(g);
  validate_config(c.model);
  Sink out(g.out, "model_" + which + ".csv");
  auto& os = out.os();
  if (which == "rf") {
    const auto in = rf::rf_input_from_config(c.model, io::model_links(c));
    const auto s = rf::solve_rf(in);
    os << "pi_cca,mean_hol_delay_s,mean_delay_s,pi_loss,mean_cca_count,mean_energy_j,utilization,residual,iterations\n"
       << format_number(s.pi_cca) << ',' << format_number(s.mean_hol_delay) << ',' << format_number(s.mean_delay) << ','
       << format_number(s.pi_loss) << ',' << format_number(s.mean_cca_count) << ',' << format_number(s.mean_energy)
       << ',' << format_number(s.utilization) << ',' << format_number(s.residual) << ',' << s.iterations << '\n';
  } else {
    const auto s = bcc::solve_bcc(bcc::bcc_input_from_config(c.model));
    os << "sigma_cca,mean_hol_delay_s,t2_s,t3_s,mean_delay_s,mean_t_w_s,pi_loss,utilization,energy_send_j,"
          "energy_recv_j,mean_energy_j,residual,iterations\n"
       << format_number(s.sigma_cca) << ',' << format_number(s.mean_hol_delay) << ',' << format_number(s.t2) << ','
       << format_number(s.t3) << ',' << format_number(s.mean_delay) << ',' << format_number(s.mean_t_w) << ','
       << format_number(s.pi_loss) << ',' << format_number(s.utilization) << ',' << format_number(s.energy_send)
       << ',' << format_number(s.energy_recv) << ',' << format_number(s.mean_energy) << ','
       << format_number(s.residual) << ',' << s.iterations << '\n';
  }
  return 0;
}

struct OptArgs {
  double tau = 1.0;
  double budget = 1e-3;
  double plr_max = 0.15;
  int m_max = 8;
  bool table = false;
};

void print_opt(std::ostream& os, const opt::OptResult& r) {
  const auto& p = r.best_params;
  os << "m_c,m_r,m_mp,r_s,r_l,energy_j,delay_s,plr,feasible_count,evaluated_count\n"
     << p.m_c << ',' << p.m_r << ',' << p.m_mp << ',' << format_number(p.r_s) << ',' << format_number(p.r_l) << ','
     << format_number(r.best.energy) << ',' << format_number(r.best.delay) << ',' << format_number(r.best.plr) << ','
     << r.feasible_count << ',' << r.evaluated_count << '\n';
}

int cmd_optimize(const Globals& g, const std::string& which, const OptArgs& a) {
  const auto c = load_run_config(g);
  validate_config(c.model);
  opt::RfOptProblem rf{rf::rf_input_from_config(c.model, io::model_links(c)), {1, a.m_max}, {1, a.m_max}, a.plr_max,
                       a.table};
  opt::BccOptProblem bcc;
  bcc.base = bcc::bcc_input_from_config(c.model);
  bcc.m_mp = {1, a.m_max};
  bcc.keep_table = a.table;
  opt::OptResult r;
  if (which == "rf") {
    r = opt::optimize_rf(rf);
  } else if (which == "bcc") {
    bcc.tau = a.tau;
    bcc.rf_delay = rf::solve_rf(rf.base).mean_delay;
    r = opt::optimize_bcc(bcc);
  } else {
    r = opt::optimize_delay_under_energy({rf, bcc, a.budget, a.table});
  }
  Sink out(g.out, "optimize_" + which + ".csv");
  print_opt(out.os(), r);
  if (a.table) {
    Sink t(g.out, "optimize_" + which + "_table.csv");
    opt::write_table_csv(t.os(), r);
  }
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& debug_path) {
  auto c = load_run_config(g);
  if (!debug_path.empty()) c.sim.record_debug = true;
  const auto m = io::run_one(c, io::system_from_name(c.system), g.seed, config_dir(g));
  Sink out(g.out, "metrics.csv");
  out.os() << sim::metrics_csv_header() << '\n';
  sim::write_metrics_row(out.os(), m);
  if (!debug_path.empty()) {
    std::ofstream f(debug_path);
    if (!f) throw Error("IO", "cannot write " + debug_path);
    for (const auto& line : m.debug_lines) f << line << '\n';
  }
  if (m.partial) throw Error("PARTIAL", "event cap reached before the run finished");
  return 0;
}

int write_sweep(const Globals& g, const io::SweepSpec& spec) {
  const auto r = io::run_sweep(spec);
  const std::string dir = g.out.empty() ? "." : g.out;
  {
    Sink l(dir, "long.csv");
    io::write_long_csv(l.os(), spec, r);
    Sink a(dir, "aggregate.csv");
    io::write_aggregate_csv(a.os(), spec, r);
  }
  if (r.failed() > 0) {
    std::ostringstream msg;
    msg << r.failed() << " of " << r.runs.size() << " runs failed:";
    for (const auto& run : r.runs)
      if (!run.ok) {
        msg << " [point " << run.point << ' ' << run.system << " seed " << run.seed << ' ' << run.error << ']';
      }
    throw Error("SWEEP", msg.str());
  }
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& spec_path, int threads) {
  auto spec = io::load_sweep(spec_path);
  if (threads > 0) spec.threads = threads;
  if (g.seed != 1) spec.first_seed = g.seed;
  return write_sweep(g, spec);
}

int cmd_trace_run(const Globals& g, const std::vector<int>& m_r, const std::vector<double>& t_est, int seeds) {
  io::SweepSpec spec;
  spec.base = load_run_config(g);
  spec.base_dir = config_dir(g);
  if (spec.base.channel != io::ChannelKind::Trace) throw ConfigError({"trace-run needs channel.mode = \"trace\""});
  spec.seeds = seeds;
  spec.first_seed = g.seed;
  io::Axis mr{"mac.m_r", {}}, te{"network.est_period", {}};
  for (int m : m_r) mr.values.emplace_back(static_cast<double>(m));
  for (double t : t_est) te.values.emplace_back(t);
  spec.axes = {te, mr};
  spec.systems = {"proposed", "baseline"};
  for (int k = 0; k < spec.base.model.network.n_nodes; ++k) {
    const std::string sys = "relay-" + std::to_string(k);
    spec.systems.push_back(sys);
    spec.labels[sys] = (k < static_cast<int>(spec.base.trace_nodes.size()) ? spec.base.trace_nodes[k]
                                                                            : "node" + std::to_string(k)) +
                       "-only";
  }
  return write_sweep(g, spec);
}

int cmd_gen_traces(const Globals& g) {
  const std::string dir = g.out.empty() ? "." : g.out;
  Sink s(dir, "walk_torso_pocket.csv");
  io::write_trace(s.os(), io::walk_trace({}, g.seed));
  return 0;
}

int cmd_selfcheck(const Globals& g) {
  int failed = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
    failed += ok ? 0 : 1;
  };
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };

  check("q(0) = 1/2", numerics::q_function(0.0) == 0.5);
  check("frame failure 0.1/0.05", std::abs(rf::frame_failure_prob(0.1, 0.05) - 0.145) < 1e-12);
  const auto t = rf_default_timing();
  check("single-attempt CCA delay", rel(rf::hol_cca_delay(0.0, 1, 3, 0, t.t_slot, t.t_cca), 0.922e-3) < 1e-12);
  check("control overhead", proto::control_overhead_bps(10, 5, 160, 1.0) == 2400.0);

  bool fp_ok = true;
  for (int nr = 1; nr <= 4; ++nr)
    for (double frac : {0.1, 0.3, 0.5}) {
      Config c = default_config();
      c.network.n_nodes = nr;
      c.network.n_relays = nr;
      c.network.per_node_rate.assign(nr, frac * max_rf_load(c.network));
      std::vector<LinkState> links(nr);
      for (auto& l : links) l.pi_e = 0.1;
      try {
        const auto s = rf::solve_rf(rf::rf_input_from_config(c, links));
        fp_ok = fp_ok && s.residual < 1e-9 && s.utilization < 1.0;
      } catch (const UnstableSystem&) {
      }
    }
  check("fixed point residual or declared instability", fp_ok);

  auto c = load_run_config(g);
  c.model.network.n_nodes = 4;
  c.model.network.n_relays = 2;
  c.model.network.per_node_rate.assign(4, 5.0);
  c.channel = io::ChannelKind::Rayleigh;
  c.sim.duration = 20.0;
  c.sim.packets_per_node = 0;
  for (const char* name : {"proposed", "baseline"}) {
    const auto sys = io::system_from_name(name);
    const auto a = io::run_one(c, sys, g.seed), b = io::run_one(c, sys, g.seed);
    std::ostringstream sa, sb;
    sim::write_metrics_row(sa, a);
    sim::write_metrics_row(sb, b);
    const std::string tag = std::string(name) + ": ";
    check((tag + "packet conservation").c_str(), a.generated == a.delivered + a.lost);
    check((tag + "relay-set invariant").c_str(), a.monitor_violations == 0 && a.max_tokens_in_flight <= 1);
    check((tag + "deterministic").c_str(), sa.str() == sb.str());
  }

  const auto tr = io::walk_trace({}, g.seed);
  std::stringstream ts;
  io::write_trace(ts, tr);
  const auto back = io::parse_trace(ts);
  bool same = back.node_names == tr.node_names;
  for (std::size_t k = 0; same && k < tr.series.size(); ++k) {
    same = back.series[k].size() == tr.series[k].size();
    for (std::size_t i = 0; same && i < tr.series[k].size(); ++i)
      same = back.series[k][i].time_s == tr.series[k][i].time_s && back.series[k][i].rssi_dbm == tr.series[k][i].rssi_dbm;
  }
  check("trace round-trip", same);

  if (failed) throw Error("SELFCHECK", std::to_string(failed) + " check(s) failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-radio body-area network models, optimizer and simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "run configuration (TOML)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory (default: stdout or .)");
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"csv"}))->capture_default_str();

  std::string which;
  auto* model = app.add_subcommand("model", "evaluate an analytic model");
  model->add_option("kind", which, "rf | bcc")->required()->check(CLI::IsMember({"rf", "bcc"}));

  OptArgs oa;
  auto* optimize = app.add_subcommand("optimize", "grid-search MAC parameters");
  optimize->add_option("kind", which, "rf | bcc | delay")->required()->check(CLI::IsMember({"rf", "bcc", "delay"}));
  optimize->add_option("--tau", oa.tau, "end-to-end delay bound in seconds (bcc)")->capture_default_str();
  optimize->add_option("--budget", oa.budget, "energy budget per packet in joules (delay)")->capture_default_str();
  optimize->add_option("--plr-max", oa.plr_max, "loss bound (rf)")->capture_default_str();
  optimize->add_option("--m-max", oa.m_max, "upper bound of the retry/backoff ranges")->capture_default_str();
  optimize->add_flag("--table", oa.table, "also write every evaluated candidate");

  std::string debug;
  auto* simulate = app.add_subcommand("simulate", "single simulation run");
  simulate->add_option("--debug", debug, "write the control-message log here");

  std::string spec_path;
  int threads = 0;
  auto* sweep = app.add_subcommand("sweep", "run a sweep spec and write long/aggregate CSVs");
  sweep->add_option("spec", spec_path, "sweep file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::vector<int> m_r{1, 2, 3, 4};
  std::vector<double> t_est{1.0, 5.0};
  int seeds = 10;
  auto* trace_run = app.add_subcommand("trace-run", "compare systems on a trace-driven configuration");
  trace_run->add_option("--m-r", m_r, "RF retry limits")->capture_default_str();
  trace_run->add_option("--t-est", t_est, "estimation periods in seconds")->capture_default_str();
  trace_run->add_option("--seeds", seeds, "seeds per point")->capture_default_str();

  auto* selfcheck = app.add_subcommand("selfcheck", "run the invariant suite");
  auto* gen = app.add_subcommand("gen-traces", "write the synthetic torso/pocket walk trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*model) return cmd_model(g, which);
    if (*optimize) return cmd_optimize(g, which, oa);
    if (*simulate) return cmd_simulate(g, debug);
    if (*sweep) return cmd_sweep(g, spec_path, threads);
    if (*trace_run) return cmd_trace_run(g, m_r, t_est, seeds);
    if (*selfcheck) return cmd_selfcheck(g);
    if (*gen) return cmd_gen_traces(g);
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    for (std::size_t i = 1; i < e.violations().size(); ++i) msg += "; " + e.violations()[i];
    std::cerr << "error: " << e.code() << ' ' << msg << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ' ' << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: INTERNAL " << e.what() << '\n';
    return 1;
  }
  return 2;
}
