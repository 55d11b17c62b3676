#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rmt_portfolio.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        RmtStatus s_ = (call);                                             \
        if (s_ != RMT_STATUS_OK) {                                         \
            fprintf(stderr, "%s failed: %d %s\n", #call, s_, rmt_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    double lo, hi;
    CHECK(rmt_mp_bounds(4.0, &lo, &hi));
    if (fabs(hi - 2.25) > 1e-12) return 1;

    RmtPanel *panel = NULL;
    CHECK(rmt_panel_synth_iid(10, 200, 1, &panel));
    RmtCorrelation *corr = NULL;
    CHECK(rmt_correlation(panel, &corr));
    RmtSpectrum *spectrum = NULL;
    CHECK(rmt_eigendecompose(corr, &spectrum));
    double ev[10];
    CHECK(rmt_spectrum_eigenvalues(spectrum, ev, 10));
    double trace = 0.0;
    for (int k = 0; k < 10; k++) trace += ev[k];
    if (fabs(trace - 10.0) > 1e-9) return 1;

    RmtFrontier *frontier = NULL;
    CHECK(rmt_efficient_frontier(panel, RMT_CORR_VARIANT_ORIGINAL, true, 20, &frontier));
    size_t len = 0;
    CHECK(rmt_frontier_len(frontier, &len));
    if (len != 20) return 1;

    if (rmt_mp_bounds(0.0, &lo, &hi) != RMT_STATUS_DOMAIN_ERROR) return 1;
    if (strlen(rmt_last_error()) == 0) return 1;

    rmt_frontier_free(frontier);
    rmt_spectrum_free(spectrum);
    rmt_correlation_free(corr);
    rmt_panel_free(panel);
    printf("ok %s\n", rmt_version());
    return 0;
}
