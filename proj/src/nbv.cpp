#include "mf/nbv.hpp"

#include <chrono>
#include <stdexcept>

#include "mf/metrics.hpp"

namespace mf {

double nbv_view_score(const TrainableModel& model, const Camera& cam, NbvCriterion criterion) {
    MomentImage img = model.render(cam, 2);
    int nch = model.feature_channels();
    double acc = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (criterion == NbvCriterion::kColorVariance) {
                for (int c = 0; c < std::min(3, nch); ++c) acc += img.variance.at(x, y, c);
            } else {
                acc += img.variance.at(x, y, nch);  // trailing depth channel
            }
        }
    return acc / (static_cast<double>(img.width) * img.height);
}

int select_nbv(const TrainableModel& model, const std::vector<Camera>& candidates,
               NbvCriterion criterion) {
    if (candidates.empty()) throw std::invalid_argument("no candidate views");
    std::vector<double> scores(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i)
        scores[i] = nbv_view_score(model, candidates[i], criterion);
    return argmax_score(scores);
}

static NbvRoundMetrics eval_round(const TrainableModel& model, const Camera& eval_cam,
                                  const FeatureImage& eval_gt) {
    MomentImage img = model.render(eval_cam, 2, /*mean_only=*/true);
    int nch = std::min(3, model.feature_channels());
    FeatureImage color(img.width, img.height, nch), gtc(img.width, img.height, nch);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < nch; ++c) {
                color.at(x, y, c) = img.m1.at(x, y, c);
                gtc.at(x, y, c) = eval_gt.at(x, y, c);
            }
    NbvRoundMetrics m;
    m.psnr = psnr(color, gtc);
    m.ssim_value = ssim(color, gtc);
    return m;
}

std::vector<NbvRoundMetrics> nbv_loop(TrainableModel& model, const TrainViews& initial,
                                      const std::vector<Camera>& candidate_cams,
                                      const std::vector<FeatureImage>& candidate_gt,
                                      const Camera& eval_cam, const FeatureImage& eval_gt,
                                      const NbvConfig& config) {
    if (candidate_cams.size() != candidate_gt.size())
        throw std::invalid_argument("candidate cameras/gt mismatch");
    if (config.rounds > static_cast<int>(candidate_cams.size()))
        throw std::invalid_argument("more rounds than candidate views");

    auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&]() {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t_start)
            .count();
    };

    TrainViews views = initial;
    std::vector<bool> used(candidate_cams.size(), false);
    std::vector<NbvRoundMetrics> metrics;

    TrainConfig tc = config.train;
    tc.iterations = config.initial_iters;
    train(model, views, eval_cam, eval_gt, tc);
    {
        NbvRoundMetrics m = eval_round(model, eval_cam, eval_gt);
        m.round = 0;
        m.wall_ms = elapsed_ms();
        metrics.push_back(m);
    }

    SeededRng pick_rng(config.train.seed, 0x9BF);
    for (int round = 1; round <= config.rounds; ++round) {
        // selection over the remaining candidates
        std::vector<int> remaining;
        for (size_t i = 0; i < candidate_cams.size(); ++i)
            if (!used[i]) remaining.push_back(static_cast<int>(i));

        int chosen;
        if (config.policy == NbvPolicy::kRandom) {
            chosen = remaining[pick_rng.next_u32() % remaining.size()];
        } else {
            std::vector<Camera> cams;
            for (int i : remaining) cams.push_back(candidate_cams[i]);
            NbvCriterion crit = config.policy == NbvPolicy::kVarianceColor
                                    ? NbvCriterion::kColorVariance
                                    : NbvCriterion::kDepthVariance;
            chosen = remaining[select_nbv(model, cams, crit)];
        }
        used[chosen] = true;
        views.cameras.push_back(candidate_cams[chosen]);
        views.gt_color.push_back(candidate_gt[chosen]);

        tc.iterations = config.iters_per_round;
        tc.initial_rays_per_image = 0;  // no second warmup
        train(model, views, eval_cam, eval_gt, tc);

        NbvRoundMetrics m = eval_round(model, eval_cam, eval_gt);
        m.round = round;
        m.selected = chosen;
        m.wall_ms = elapsed_ms();
        metrics.push_back(m);
    }
    return metrics;
}

}  // namespace mf
