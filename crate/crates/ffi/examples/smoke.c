/* Minimal C client: builds a dataset with a mean shift and tests it. */
#include <math.h>
#include <stdio.h>
#include "rmcpd.h"

int main(void) {
    RmcpdDataset *ds = NULL;
    if (rmcpd_dataset_generate(RMCPD_FAMILY_GAUSSIAN, 3, 60, 3, 10, 30, 7, &ds) != RMCPD_STATUS_OK) {
        fprintf(stderr, "generate: %s\n", rmcpd_last_error_message());
        return 1;
    }
    RmcpdDetectOptions opts = rmcpd_detect_options_default();
    RmcpdDetectResult res;
    if (rmcpd_detect(ds, &opts, &res) != RMCPD_STATUS_OK) {
        fprintf(stderr, "detect: %s\n", rmcpd_last_error_message());
        rmcpd_dataset_free(ds);
        return 1;
    }
    printf("tau_hat=%zu M=%.4f p=%.4g reject=%d\n", res.tau_hat, res.m_star, res.p_value, res.reject);

    double b = 0.0;
    rmcpd_critical_value_a1(0.05, RMCPD_CHANNEL_OUT_W, 200, 10, 190, &b);
    printf("A1 out_w critical value: %.3f\n", b);
    rmcpd_dataset_free(ds);
    return fabs(b - 2.986) < 0.005 ? 0 : 1;
}
