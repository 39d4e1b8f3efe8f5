#include <math.h>
#include <stdio.h>

#include "confgap.h"

int main(void) {
    ConfgapMetric *m = NULL;
    ConfgapRoot root;
    double radius = 0.0;

    if (confgap_metric_new(CONFGAP_METRIC_KIND_GAUSSIAN, &m) != CONFGAP_STATUS_OK) return 1;
    if (confgap_metric_sigma_positivity_radius(m, &radius) != CONFGAP_STATUS_OK || radius != 2.0) return 2;
    confgap_metric_free(m);

    if (confgap_metric_new(CONFGAP_METRIC_KIND_EUCLIDEAN, &m) != CONFGAP_STATUS_OK) return 3;
    if (confgap_find_free_boundary(m, 0.0, 1.0, 0.1, 0.5, 1e-12, &root) != CONFGAP_STATUS_NO_ROOT) return 4;
    if (confgap_last_error() == NULL) return 5;
    if (confgap_find_free_boundary(m, 0.0, 1.0, 0.5, 2.0, 1e-12, &root) != CONFGAP_STATUS_OK) return 6;
    confgap_metric_free(m);

    printf("%.12f\n", root.parameter);
    return fabs(root.parameter - 1.1996786402575) < 1e-10 ? 0 : 7;
}
