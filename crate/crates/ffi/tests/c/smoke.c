#include <stdio.h>
#include <stdlib.h>

#include "mfrpn.h"

static int fail(const char *what, MfrpnStatus s) {
    const char *msg = mfrpn_last_error_message();
    fprintf(stderr, "%s: status %d: %s\n", what, (int)s, msg ? msg : "(none)");
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke CHECKPOINT_DIR\n");
        return 2;
    }
    MfrpnModel *model = NULL;
    MfrpnStatus s = mfrpn_model_open("/nonexistent/checkpoint", false, &model);
    if (s != MFRPN_STATUS_IO || model != NULL || mfrpn_last_error_message() == NULL) {
        return fail("missing checkpoint", s);
    }
    s = mfrpn_model_open(argv[1], false, &model);
    if (s != MFRPN_STATUS_OK) {
        return fail("open", s);
    }
    size_t n_in = mfrpn_model_input_dim(model);
    size_t n_out = mfrpn_model_output_dim(model);
    printf("dims %zu %zu members %zu\n", n_in, n_out, mfrpn_model_member_count(model));

    double x[3] = {0.1, 0.8, 1.1};
    double mean[3], sigma[3];
    s = mfrpn_model_predict(model, x, 3, n_in, mean, sigma, 3 * n_out);
    if (s != MFRPN_STATUS_OK) {
        return fail("predict", s);
    }
    for (int i = 0; i < 3; i++) {
        printf("%.17g %.17g\n", mean[i], sigma[i]);
    }
    s = mfrpn_model_predict(model, x, 3, n_in, mean, NULL, 2);
    if (s != MFRPN_STATUS_BUFFER_TOO_SMALL) {
        return fail("short buffer", s);
    }
    mfrpn_model_free(model);

    double samples[2] = {0.0, 2.0};
    double crps = 0.0;
    s = mfrpn_crps_fair(samples, 2, 1.0, &crps);
    if (s != MFRPN_STATUS_OK) {
        return fail("crps", s);
    }
    printf("crps %.17g\n", crps);
    return 0;
}
