#pragma once

#include <string>
#include <vector>

#include "dpc/tensor.hpp"

namespace dpc {

// Contiguous [begin, end) sample range of a time series.
struct SplitRange {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
};

struct DatasetSplits {
  SplitRange train, dev, test;
};

// Chronological thirds; any remainder stays in the test split.
DatasetSplits equal_thirds(int samples);

// Raw operation record: u_k and d_k act between y_k and y_{k+1}.
struct SeriesData {
  Tensor u;  // n_u x T
  Tensor d;  // n_d x T
  Tensor y;  // n_y x T
  int samples() const { return y.cols(); }
};

// Synthetic control-training series: a perturbed output trajectory plus
// bound schedules and the shared disturbance.
struct CtrlSeriesData {
  Tensor y_pert;  // n_y x T
  Tensor d;       // n_d x T
  Tensor y_lb, y_ub;  // n_y x T
  Tensor u_lb, u_ub;  // n_u x T
  int samples() const { return y_pert.cols(); }
};

// Per-channel standardization statistics. Outputs and disturbances use
// mean/std; controls use a scale-only factor so u = 0 is preserved (the
// energy term of the control loss measures distance from zero).
struct NormStats {
  std::vector<double> y_mean, y_std;
  std::vector<double> d_mean, d_std;
  std::vector<double> u_scale;
};

NormStats compute_norm_stats(const SeriesData& series, SplitRange train);

// (x - mean) / std per channel, replicated across a stacked trajectory
Tensor standardize_rows(const Tensor& stacked, const std::vector<double>& mean,
                        const std::vector<double>& stddev);
Tensor destandardize_rows(const Tensor& stacked, const std::vector<double>& mean,
                          const std::vector<double>& stddev);
Tensor scale_rows(const Tensor& stacked, const std::vector<double>& scale, bool invert);

// Column-batched system-identification windows. Column j holds one anchor:
// `past` stacks the n_past outputs ending at the anchor, `controls` and
// `disturbances` stack the horizon inputs, `targets` the horizon outputs.
struct SysIdBatch {
  Tensor past;          // (n_past*n_y) x n
  Tensor controls;      // (horizon*n_u) x n
  Tensor disturbances;  // (horizon*n_d) x n
  Tensor targets;       // (horizon*n_y) x n
  int count() const { return past.cols(); }
};

// Column-batched control-training scenarios (engineering units).
struct ScenarioBatch {
  Tensor past;          // (n_past*n_y) x n
  Tensor y_lb, y_ub;    // (horizon*n_y) x n
  Tensor u_lb, u_ub;    // (horizon*n_u) x n
  Tensor disturbances;  // (horizon*n_d) x n
  Tensor u_prev;        // n_u x n
  int count() const { return past.cols(); }
};

// Anchor positions whose [anchor-n_past+1, anchor+horizon] window fits inside
// the split.
std::vector<int> window_anchors(SplitRange split, int n_past, int horizon);

SysIdBatch make_sysid_batch(const SeriesData& series, const std::vector<int>& anchors,
                            int n_past, int horizon);
ScenarioBatch make_scenario_batch(const CtrlSeriesData& series, const std::vector<int>& anchors,
                                  int n_past, int horizon);

// CSV round trip. Headers are fixed: time,u_*,d_*,y_* for operation data and
// time,ypert_*,d_*,ylb_*,yub_*,ulb_*,uub_* for control data. Values are
// written with 17 significant digits so reads are bit-exact.
void write_sysid_csv(const std::string& path, const SeriesData& series, double ts_seconds);
SeriesData read_sysid_csv(const std::string& path, int n_u, int n_d, int n_y);
void write_ctrl_csv(const std::string& path, const CtrlSeriesData& series, double ts_seconds);
CtrlSeriesData read_ctrl_csv(const std::string& path, int n_u, int n_d, int n_y);

}  // namespace dpc
