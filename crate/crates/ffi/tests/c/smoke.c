#include <math.h>
#include <stdio.h>
#include "quadrom.h"

#define N_POINTS 40

int main(void) {
    QrSystem *toy = NULL;
    if (qr_system_toy(&toy) != QR_STATUS_OK) return 1;

    double omegas[N_POINTS], h1[2 * N_POINTS], h2[2 * N_POINTS], h3[2 * N_POINTS];
    for (int k = 0; k < N_POINTS; k++)
        omegas[k] = pow(10.0, -0.5 + (log10(5.0) + 0.5) * k / (N_POINTS - 1));
    if (qr_sample_direct(toy, omegas, N_POINTS, h1, h2, h3) != QR_STATUS_OK) return 2;

    QrLearnOptions opts = qr_learn_options_default();
    opts.threshold = 1e-8;
    opts.tau = 1e-12;
    QrFit *fit = NULL;
    if (qr_fit_learn(omegas, N_POINTS, h1, h2, h3, &opts, &fit) != QR_STATUS_OK) {
        fprintf(stderr, "%s\n", qr_last_error_message());
        return 3;
    }
    QrSystem *model = NULL;
    if (qr_fit_model(fit, &model) != QR_STATUS_OK) return 4;

    double re0, im0, re1, im1;
    qr_system_eval_h(toy, 3, 0.0, 1.3, &re0, &im0);
    qr_system_eval_h(model, 3, 0.0, 1.3, &re1, &im1);
    printf("order %zu iterations %zu converged %d dH3 %.3e\n", qr_fit_order(fit), qr_fit_iterations(fit),
           qr_fit_converged(fit), hypot(re0 - re1, im0 - im1));
    int ok = qr_fit_order(fit) == 2 && qr_fit_converged(fit) && hypot(re0 - re1, im0 - im1) < 1e-8;

    if (qr_system_eval_h(toy, 7, 0.0, 1.0, &re0, &im0) != QR_STATUS_INVALID_ARGUMENT) ok = 0;
    if (qr_last_error_message() == NULL) ok = 0;

    qr_system_free(model);
    qr_fit_free(fit);
    qr_system_free(toy);
    return ok ? 0 : 5;
}
