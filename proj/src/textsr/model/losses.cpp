#include "textsr/model/losses.hpp"

namespace textsr::model {

namespace o = textsr::ops;

Val gradient_profile_loss(Val x_sr, Val x_gt) {
    Graph& g = *x_sr.g;
    check_same_shape(g.val(x_sr), g.val(x_gt), "gradient_profile_loss");
    Val dxs = o::diff_w(x_sr);
    Val dxg = o::diff_w(x_gt);
    Val dys = o::diff_h(x_sr);
    Val dyg = o::diff_h(x_gt);
    Val ax = o::sum_all(o::abs_(o::sub(dxg, dxs)));
    Val ay = o::sum_all(o::abs_(o::sub(dyg, dys)));
    const int64_t count = g.val(dxs).numel() + g.val(dys).numel();
    return o::scale(o::add(ax, ay), 1.0 / static_cast<real>(count));
}

Val dice_loss(Val pred, Val gt, real eps) {
    Graph& g = *pred.g;
    check_same_shape(g.val(pred), g.val(gt), "dice_loss");
    Val inter = o::sum_all(o::mul(pred, gt));
    Val denom = o::add_const(o::add(o::sum_all(o::square(pred)), o::sum_all(o::square(gt))), eps);
    Val dice = o::div(o::scale(inter, 2.0), denom);
    return o::add_const(o::scale(dice, -1.0), 1.0);
}

Val edge_loss(Val x0_hat, Val x0) {
    Graph& g = *x0_hat.g;
    check_same_shape(g.val(x0_hat), g.val(x0), "edge_loss");
    return o::rms(o::sub(o::laplacian(x0), o::laplacian(x0_hat)));
}

real dice_score(const Tensor& pred, const Tensor& gt, real eps) {
    check_same_shape(pred, gt, "dice_score");
    real inter = 0, p2 = 0, g2 = 0;
    for (int64_t i = 0, n = pred.numel(); i < n; ++i) {
        inter += pred[i] * gt[i];
        p2 += pred[i] * pred[i];
        g2 += gt[i] * gt[i];
    }
    return 2.0 * inter / (p2 + g2 + eps);
}

}  // namespace textsr::model
