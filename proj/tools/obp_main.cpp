// obp: one-bit downlink precoding experiment driver.
//
// Subcommands:
//   rate-sweep      ergodic sum-rate lower bounds vs SNR (covariance shaping)
//   precoder-sweep  BER / MSE / iteration counts vs transmit energy
//   csi-sweep       BER vs channel-estimation error at fixed SNR
//   validate        run the numerical oracle suite
//
// Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.

#include "obp/io.hpp"
#include "obp/sim.hpp"
#include "obp/validate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct CommonOpts {
  int nt = 0;
  int k = 0;
  int streams = 2;
  std::vector<double> snr;
  int channels = 0;
  int block_len = 10000;
  std::uint64_t seed = 1;
  std::vector<double> xi_grid;
  std::string methods;
  std::string out;
  std::string config_path;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--nt", o.nt, "transmit antennas");
  cmd->add_option("--k", o.k, "single-antenna users");
  cmd->add_option("--streams", o.streams, "QPSK streams per user (R)");
  cmd->add_option("--snr", o.snr, "SNR grid in dB")->delimiter(',');
  cmd->add_option("--channels", o.channels, "channel realizations");
  cmd->add_option("--block-len", o.block_len, "symbols per channel");
  cmd->add_option("--seed", o.seed, "base RNG seed");
  cmd->add_option("--xi-grid", o.xi_grid, "CSI error variances")->delimiter(',');
  cmd->add_option("--methods", o.methods, "comma-separated method list");
  cmd->add_option("--out", o.out, "output CSV path (default stdout)");
  cmd->add_option("--config", o.config_path, "key=value config file; CLI flags override");
}

// Flat key=value file; keys mirror the long flags without dashes.
void apply_config_file(const std::string& path, CommonOpts& o, CLI::App* cmd) {
  std::ifstream f(path);
  if (!f) throw CLI::ValidationError("--config", "cannot read " + path);
  std::string line;
  auto set_if_default = [&](const std::string& flag, const std::string& value) {
    CLI::Option* opt = cmd->get_option(flag);
    if (opt->count() == 0) opt->add_result(value)->run_callback();
  };
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    set_if_default("--" + key, value);
  }
  (void)o;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw CLI::ValidationError("config", msg);
}

void validate_common(const CommonOpts& o) {
  require(o.nt >= 1, "nt must be >= 1");
  require(o.k >= 1, "k must be >= 1");
  require(o.k <= o.nt, "k must not exceed nt");
  require(o.streams >= 1 && o.streams <= 6, "streams must be in [1,6]");
  require(o.channels >= 1, "channels must be >= 1");
  require(o.block_len >= 1, "block-len must be >= 1");
  require(!o.snr.empty(), "snr grid must be nonempty");
  for (double x : o.xi_grid) require(x >= 0.0 && x <= 1.0, "xi values must lie in [0,1]");
}

std::vector<obp::Method> parse_methods(const std::string& list, const std::vector<obp::Method>& dflt) {
  if (list.empty()) return dflt;
  std::vector<obp::Method> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    obp::Method m;
    if (!obp::parse_method(tok, m)) throw CLI::ValidationError("--methods", "unknown method: " + tok);
    out.push_back(m);
  }
  require(!out.empty(), "method list must be nonempty");
  return out;
}

std::string echo_config(const CommonOpts& o, const std::string& mode) {
  std::ostringstream os;
  os << "mode=" << mode << " nt=" << o.nt << " k=" << o.k << " streams=" << o.streams
     << " channels=" << o.channels << " block_len=" << o.block_len << " seed=" << o.seed;
  os << " snr=";
  for (std::size_t i = 0; i < o.snr.size(); ++i) os << (i ? "," : "") << o.snr[i];
  if (!o.xi_grid.empty()) {
    os << " xi=";
    for (std::size_t i = 0; i < o.xi_grid.size(); ++i) os << (i ? "," : "") << o.xi_grid[i];
  }
  if (!o.methods.empty()) os << " methods=" << o.methods;
  return os.str();
}

void emit(const obp::SweepResult& res, const CommonOpts& o, const std::string& mode) {
  const std::string body = obp::sweep_to_csv(res, echo_config(o, mode));
  if (o.out.empty())
    std::cout << body;
  else
    obp::write_file(o.out, body);
}

int cmd_rate_sweep(CommonOpts o) {
  if (o.nt == 0) o.nt = 16;
  if (o.k == 0) o.k = 2;
  if (o.channels == 0) o.channels = 200;
  if (o.snr.empty())
    for (int db = -20; db <= 20; db += 5) o.snr.push_back(db);
  validate_common(o);
  obp::RateSweepConfig cfg;
  cfg.nt = o.nt;
  cfg.k_users = o.k;
  cfg.snr_db = o.snr;
  cfg.n_channels = o.channels;
  cfg.seed = o.seed;
  emit(obp::rate_sweep(cfg), o, "rate-sweep");
  return 0;
}

obp::LinkConfig make_link_config(const CommonOpts& o) {
  obp::LinkConfig cfg;
  cfg.nt = o.nt;
  cfg.k_users = o.k;
  cfg.streams = o.streams;
  cfg.snr_db = o.snr;
  cfg.block_len = o.block_len;
  cfg.n_channels = o.channels;
  cfg.seed = o.seed;
  return cfg;
}

int cmd_precoder_sweep(CommonOpts o) {
  if (o.nt == 0) o.nt = 128;
  if (o.k == 0) o.k = 4;
  if (o.channels == 0) o.channels = 200;
  if (o.snr.empty())
    for (int db = 0; db <= 21; db += 3) o.snr.push_back(db);
  validate_common(o);
  const auto methods = parse_methods(
      o.methods, {obp::Method::TxwfqPiWl, obp::Method::TxwfqPiSl, obp::Method::Txwfq, obp::Method::TxwfUnq});
  emit(obp::ergodic_sweep(make_link_config(o), methods), o, "precoder-sweep");
  return 0;
}

int cmd_csi_sweep(CommonOpts o) {
  if (o.nt == 0) o.nt = 128;
  if (o.k == 0) o.k = 4;
  if (o.channels == 0) o.channels = 200;
  if (o.snr.empty()) o.snr = {12.0};
  if (o.xi_grid.empty()) o.xi_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0};
  validate_common(o);
  std::sort(o.xi_grid.begin(), o.xi_grid.end());
  obp::LinkConfig cfg = make_link_config(o);
  cfg.xi_grid = o.xi_grid;
  const auto methods = parse_methods(o.methods, {obp::Method::TxwfqPiWl, obp::Method::Txwfq});
  emit(obp::ergodic_sweep(cfg, methods), o, "csi-sweep");
  return 0;
}

int cmd_validate() {
  const auto checks = obp::run_all_checks();
  int failures = 0;
  for (const auto& c : checks) {
    std::printf("%-34s %s  measured=%.6g expected=%.6g tol=%.3g", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.measured, c.expected, c.tolerance);
    if (!c.detail.empty()) std::printf("  (%s)", c.detail.c_str());
    std::printf("\n");
    failures += c.pass ? 0 : 1;
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-bit downlink precoding experiments"};
  app.require_subcommand(1);

  CommonOpts rate_o, prec_o, csi_o;
  CLI::App* rate = app.add_subcommand("rate-sweep", "ergodic sum-rate lower bounds vs SNR");
  CLI::App* prec = app.add_subcommand("precoder-sweep", "BER/MSE/iterations vs transmit energy");
  CLI::App* csi = app.add_subcommand("csi-sweep", "BER vs CSI error at fixed SNR");
  app.add_subcommand("validate", "run the numerical oracle suite");
  add_common_flags(rate, rate_o);
  add_common_flags(prec, prec_o);
  add_common_flags(csi, csi_o);

  try {
    app.parse(argc, argv);
    for (auto [cmd, opts] : {std::pair{rate, &rate_o}, {prec, &prec_o}, {csi, &csi_o}})
      if (cmd->parsed() && !opts->config_path.empty()) apply_config_file(opts->config_path, *opts, cmd);

    if (rate->parsed()) return cmd_rate_sweep(rate_o);
    if (prec->parsed()) return cmd_precoder_sweep(prec_o);
    if (csi->parsed()) return cmd_csi_sweep(csi_o);
    return cmd_validate();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
