#pragma once

// CSV emission for sweep results and a plain-text precoder matrix format.

#include "obp/precoder.hpp"
#include "obp/sim.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace obp {

inline constexpr const char* kCsvSchemaVersion = "1";

// Header comment lines carry the schema version and the run configuration so
// a result file is self-describing. Column order is fixed.
inline std::string sweep_to_csv(const SweepResult& res, const std::string& config_echo) {
  std::ostringstream os;
  os << "# obp sweep v" << kCsvSchemaVersion << "\n";
  if (!config_echo.empty()) os << "# " << config_echo << "\n";
  os << "snr_db,method,ber,ber_ci,mse,mse_ci,sum_rate_lb,mean_iters,n_channels,block_len,seed,xi\n";
  os << std::setprecision(10);
  for (const SweepPoint& p : res.points) {
    os << p.snr_db << ',' << p.method << ',' << p.ber << ',' << p.ber_ci << ',' << p.mse << ','
       << p.mse_ci << ',' << p.sum_rate_lb << ',' << p.mean_iters << ',' << p.n_channels << ','
       << p.block_len << ',' << p.seed << ',' << p.xi << "\n";
  }
  return os.str();
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << body;
  if (!f) throw std::runtime_error("write failed: " + path);
}

// Precoder text format: one dims line, then the row-major matrix entries.
inline std::string precoder_to_text(const PrecoderSolution& sol) {
  std::ostringstream os;
  os << "obp precoder v1\n";
  os << sol.precoder.rows() << ' ' << sol.precoder.cols() << ' ' << std::setprecision(17)
     << sol.beta << ' ' << (sol.quantized ? 1 : 0) << "\n";
  for (Index i = 0; i < sol.precoder.rows(); ++i) {
    for (Index j = 0; j < sol.precoder.cols(); ++j) {
      if (j) os << ' ';
      os << sol.precoder(i, j);
    }
    os << "\n";
  }
  return os.str();
}

inline void precoder_from_text(std::istream& in, Mat& p, double& beta, bool& quantized) {
  std::string magic;
  std::getline(in, magic);
  if (magic != "obp precoder v1") throw std::runtime_error("bad precoder file header");
  Index rows, cols;
  int q;
  in >> rows >> cols >> beta >> q;
  if (!in || rows < 1 || cols < 1) throw std::runtime_error("bad precoder dims");
  quantized = q != 0;
  p.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(in >> p(i, j))) throw std::runtime_error("truncated precoder file");
}

}  // namespace obp
