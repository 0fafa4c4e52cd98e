#include "dpc/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

DatasetSplits equal_thirds(int samples) {
  if (samples < 3) throw ContractError("equal_thirds: need at least 3 samples");
  const int third = samples / 3;
  DatasetSplits s;
  s.train = {0, third};
  s.dev = {third, 2 * third};
  s.test = {2 * third, samples};
  return s;
}

namespace {

void channel_stats(const Tensor& series, SplitRange r, std::vector<double>& mean,
                   std::vector<double>& stddev) {
  const int n = r.length();
  mean.assign(series.rows(), 0.0);
  stddev.assign(series.rows(), 1.0);
  for (int c = 0; c < series.rows(); ++c) {
    double m = 0.0;
    for (int t = r.begin; t < r.end; ++t) m += series(c, t);
    m /= n;
    double var = 0.0;
    for (int t = r.begin; t < r.end; ++t) {
      const double dv = series(c, t) - m;
      var += dv * dv;
    }
    mean[c] = m;
    const double sd = std::sqrt(var / n);
    stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
}

}  // namespace

NormStats compute_norm_stats(const SeriesData& series, SplitRange train) {
  NormStats stats;
  channel_stats(series.y, train, stats.y_mean, stats.y_std);
  channel_stats(series.d, train, stats.d_mean, stats.d_std);
  stats.u_scale.assign(series.u.rows(), 1.0);
  for (int c = 0; c < series.u.rows(); ++c) {
    double m = 0.0;
    for (int t = train.begin; t < train.end; ++t) m = std::max(m, std::fabs(series.u(c, t)));
    stats.u_scale[c] = m > 1e-12 ? m : 1.0;
  }
  return stats;
}

namespace {

Tensor affine_rows(const Tensor& stacked, const std::vector<double>& shift,
                   const std::vector<double>& factor, bool forward) {
  const int ch = static_cast<int>(factor.size());
  if (stacked.rows() % ch != 0) {
    throw DimensionError("row count " + std::to_string(stacked.rows()) +
                         " is not a multiple of channel count " + std::to_string(ch));
  }
  Tensor out(stacked.rows(), stacked.cols());
  for (int i = 0; i < stacked.rows(); ++i) {
    const int c = i % ch;
    for (int j = 0; j < stacked.cols(); ++j) {
      out(i, j) = forward ? (stacked(i, j) - shift[c]) / factor[c]
                          : stacked(i, j) * factor[c] + shift[c];
    }
  }
  return out;
}

}  // namespace

Tensor standardize_rows(const Tensor& stacked, const std::vector<double>& mean,
                        const std::vector<double>& stddev) {
  return affine_rows(stacked, mean, stddev, true);
}

Tensor destandardize_rows(const Tensor& stacked, const std::vector<double>& mean,
                          const std::vector<double>& stddev) {
  return affine_rows(stacked, mean, stddev, false);
}

Tensor scale_rows(const Tensor& stacked, const std::vector<double>& scale, bool invert) {
  std::vector<double> zero(scale.size(), 0.0);
  return affine_rows(stacked, zero, scale, invert);
}

std::vector<int> window_anchors(SplitRange split, int n_past, int horizon) {
  std::vector<int> anchors;
  // anchor t uses y[t-n_past+1 .. t] and inputs/targets up to t+horizon
  for (int t = split.begin + n_past - 1; t + horizon < split.end; ++t) anchors.push_back(t);
  return anchors;
}

namespace {

// copies the length-`steps` stacked window of `series` starting at `start`
// into column `col` beginning at row `row0`
void fill_window(Tensor& dst, int col, int row0, const Tensor& series, int start, int steps) {
  const int ch = series.rows();
  for (int k = 0; k < steps; ++k)
    for (int c = 0; c < ch; ++c) dst(row0 + k * ch + c, col) = series(c, start + k);
}

}  // namespace

SysIdBatch make_sysid_batch(const SeriesData& series, const std::vector<int>& anchors,
                            int n_past, int horizon) {
  if (anchors.empty()) throw ContractError("make_sysid_batch: empty batch");
  const int n = static_cast<int>(anchors.size());
  SysIdBatch b{Tensor(n_past * series.y.rows(), n), Tensor(horizon * series.u.rows(), n),
               Tensor(horizon * series.d.rows(), n), Tensor(horizon * series.y.rows(), n)};
  for (int j = 0; j < n; ++j) {
    const int t = anchors[j];
    fill_window(b.past, j, 0, series.y, t - n_past + 1, n_past);
    fill_window(b.controls, j, 0, series.u, t, horizon);
    fill_window(b.disturbances, j, 0, series.d, t, horizon);
    fill_window(b.targets, j, 0, series.y, t + 1, horizon);
  }
  return b;
}

ScenarioBatch make_scenario_batch(const CtrlSeriesData& series, const std::vector<int>& anchors,
                                  int n_past, int horizon) {
  if (anchors.empty()) throw ContractError("make_scenario_batch: empty batch");
  const int n = static_cast<int>(anchors.size());
  const int n_y = series.y_pert.rows(), n_u = series.u_lb.rows(), n_d = series.d.rows();
  ScenarioBatch b{Tensor(n_past * n_y, n),   Tensor(horizon * n_y, n), Tensor(horizon * n_y, n),
                  Tensor(horizon * n_u, n),  Tensor(horizon * n_u, n), Tensor(horizon * n_d, n),
                  Tensor(n_u, n, 0.0)};
  for (int j = 0; j < n; ++j) {
    const int t = anchors[j];
    fill_window(b.past, j, 0, series.y_pert, t - n_past + 1, n_past);
    fill_window(b.y_lb, j, 0, series.y_lb, t + 1, horizon);
    fill_window(b.y_ub, j, 0, series.y_ub, t + 1, horizon);
    fill_window(b.u_lb, j, 0, series.u_lb, t, horizon);
    fill_window(b.u_ub, j, 0, series.u_ub, t, horizon);
    fill_window(b.disturbances, j, 0, series.d, t, horizon);
  }
  return b;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<const Tensor*>& blocks, double ts_seconds) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  const int samples = blocks.front()->cols();
  for (int t = 0; t < samples; ++t) {
    out << fmt_double(t * ts_seconds);
    for (const Tensor* b : blocks)
      for (int c = 0; c < b->rows(); ++c) out << "," << fmt_double((*b)(c, t));
    out << "\n";
  }
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

std::vector<std::string> make_header(const std::vector<std::pair<std::string, int>>& groups) {
  std::vector<std::string> h{"time"};
  for (const auto& [prefix, n] : groups)
    for (int i = 0; i < n; ++i) h.push_back(prefix + "_" + std::to_string(i));
  return h;
}

void read_csv(const std::string& path, const std::vector<std::string>& expect_header,
              const std::vector<Tensor*>& blocks) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= expect_header.size() || cell != expect_header[i]) {
        throw ValidationError("'" + path + "': unexpected column '" + cell + "' at index " +
                              std::to_string(i));
      }
      ++i;
    }
    if (i != expect_header.size())
      throw ValidationError("'" + path + "': expected " + std::to_string(expect_header.size()) +
                            " columns, got " + std::to_string(i));
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    const char* p = line.c_str();
    char* endp = nullptr;
    while (true) {
      vals.push_back(std::strtod(p, &endp));
      if (p == endp) throw ValidationError("'" + path + "': malformed number in row " +
                                           std::to_string(rows.size() + 1));
      if (*endp == ',') {
        p = endp + 1;
      } else {
        break;
      }
    }
    if (vals.size() != expect_header.size())
      throw ValidationError("'" + path + "': row " + std::to_string(rows.size() + 1) +
                            " has " + std::to_string(vals.size()) + " fields");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ValidationError("'" + path + "' has no data rows");
  const int samples = static_cast<int>(rows.size());
  int col = 1;  // skip time
  for (Tensor* b : blocks) {
    *b = Tensor(b->rows(), samples);
    for (int t = 0; t < samples; ++t)
      for (int c = 0; c < b->rows(); ++c) (*b)(c, t) = rows[t][col + c];
    col += b->rows();
  }
}

}  // namespace

void write_sysid_csv(const std::string& path, const SeriesData& series, double ts_seconds) {
  write_csv(path,
            make_header({{"u", series.u.rows()}, {"d", series.d.rows()}, {"y", series.y.rows()}}),
            {&series.u, &series.d, &series.y}, ts_seconds);
}

SeriesData read_sysid_csv(const std::string& path, int n_u, int n_d, int n_y) {
  SeriesData s{Tensor(n_u, 1), Tensor(n_d, 1), Tensor(n_y, 1)};
  read_csv(path, make_header({{"u", n_u}, {"d", n_d}, {"y", n_y}}), {&s.u, &s.d, &s.y});
  return s;
}

void write_ctrl_csv(const std::string& path, const CtrlSeriesData& series, double ts_seconds) {
  write_csv(path,
            make_header({{"ypert", series.y_pert.rows()},
                         {"d", series.d.rows()},
                         {"ylb", series.y_lb.rows()},
                         {"yub", series.y_ub.rows()},
                         {"ulb", series.u_lb.rows()},
                         {"uub", series.u_ub.rows()}}),
            {&series.y_pert, &series.d, &series.y_lb, &series.y_ub, &series.u_lb, &series.u_ub},
            ts_seconds);
}

CtrlSeriesData read_ctrl_csv(const std::string& path, int n_u, int n_d, int n_y) {
  CtrlSeriesData s{Tensor(n_y, 1), Tensor(n_d, 1), Tensor(n_y, 1),
                   Tensor(n_y, 1), Tensor(n_u, 1), Tensor(n_u, 1)};
  read_csv(path,
           make_header({{"ypert", n_y}, {"d", n_d}, {"ylb", n_y}, {"yub", n_y}, {"ulb", n_u}, {"uub", n_u}}),
           {&s.y_pert, &s.d, &s.y_lb, &s.y_ub, &s.u_lb, &s.u_ub});
  return s;
}

}  // namespace dpc
