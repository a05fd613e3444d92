#pragma once

#include <vector>

#include "mf/train.hpp"

namespace mf {

enum class NbvCriterion { kColorVariance, kDepthVariance };
enum class NbvPolicy { kVarianceColor, kVarianceDepth, kRandom };

// Index of the candidate with the highest mean per-pixel channel-summed
// variance; ties resolved toward the lowest index.
int select_nbv(const TrainableModel& model, const std::vector<Camera>& candidates,
               NbvCriterion criterion);

// Aggregate variance score of one view (mean over pixels of channel-summed
// color or depth variance).
double nbv_view_score(const TrainableModel& model, const Camera& cam, NbvCriterion criterion);

struct NbvRoundMetrics {
    int round = 0;          // 0 = after initial training
    int selected = -1;      // candidate index chosen this round (-1 initially)
    double psnr = 0.0;
    double ssim_value = 0.0;
    double wall_ms = 0.0;
};

struct NbvConfig {
    int rounds = 3;
    int initial_iters = 300;
    int iters_per_round = 300;
    NbvPolicy policy = NbvPolicy::kVarianceColor;
    TrainConfig train;  // sampler/seed/lr for the inner training loop
};

// Greedy NBV: train on the initial views, then per round add the selected
// candidate view and continue training; metrics on the held-out eval view.
std::vector<NbvRoundMetrics> nbv_loop(TrainableModel& model, const TrainViews& initial,
                                      const std::vector<Camera>& candidate_cams,
                                      const std::vector<FeatureImage>& candidate_gt,
                                      const Camera& eval_cam, const FeatureImage& eval_gt,
                                      const NbvConfig& config);

}  // namespace mf
