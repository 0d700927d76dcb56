// Simulate a small survey, score it, and turn one image into a label grid.
#include <census/evaluate.hpp>
#include <census/gridlabels.hpp>
#include <census/metrics.hpp>
#include <census/simulate.hpp>

#include <cstdio>

int main() {
    using namespace census;

    CampaignSpec spec;
    spec.n_images = 200;
    spec.seed = 42;
    const Campaign c = generate_campaign(spec);
    std::printf("%zu images, %zu animals, %zu detections\n", c.dataset.images.size(), c.dataset.ground_truth.size(),
                c.detections.size());

    const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(50.0), 0.5);
    std::printf("threshold 0.5: TP %zu FP %zu FN %zu  precision %.3f recall %.3f F1 %.3f\n", m.point.tp, m.point.fp,
                m.point.fn, m.point.precision, m.point.recall, m.point.f1);

    const auto curve = pr_curve(c.dataset.ground_truth, c.detections, DistanceRange(50.0), uniform_thresholds(10));
    for (const auto& p : curve.points) std::printf("  t=%.2f  P=%.3f  R=%.3f\n", p.threshold, p.precision, p.recall);
    if (const auto* p = point_at_recall(curve, 0.8))
        std::printf("at recall >= 0.8: threshold %.2f, precision %.3f\n", p->threshold, p->precision);

    const auto report = tile_report(c.dataset.ground_truth, c.detections, c.dataset.images, TileGridSpec(1000, 1000), 0.5);
    std::printf("tiles to screen: %zu of %zu\n", report.tiles_with_detections, report.tiles_total);

    const auto& first = c.dataset.ground_truth.front();
    std::vector<GroundTruthPoint> points;
    for (const auto& g : c.dataset.ground_truth)
        if (g.image_id == first.image_id) points.push_back(g);
    const auto grid = make_image_label_grid(points, *c.dataset.find_image(first.image_id));
    const auto h = class_histogram(grid);
    std::printf("%s label grid %zux%zu: %zu animal, %zu border cells\n", first.image_id.c_str(), grid.rows, grid.cols,
                h[class_index(ClassLabel::Animal)], h[class_index(ClassLabel::Border)]);
}
