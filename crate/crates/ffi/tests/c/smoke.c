#include <math.h>
#include <stdio.h>
#include "sqdrive.h"

int main(void) {
    SqdCircuit *c = NULL;
    if (sqd_circuit_preset(SQD_MODE_GHZ3132, &c) != SQD_STATUS_OK) return 10;
    double fr = 0.0;
    if (sqd_circuit_resonance(c, &fr, NULL) != SQD_STATUS_OK) return 11;
    printf("%.6f\n", fr);

    double bad[8] = {1, 1, -1, 1, 1, 1, 1, 1};
    SqdCircuit *d = NULL;
    if (sqd_circuit_new(bad, &d) != SQD_STATUS_VALIDATION) return 12;
    if (sqd_last_error() == NULL || d != NULL) return 13;

    double f[3] = {fr - 0.002, fr, fr + 0.002};
    double tau[41];
    for (int i = 0; i < 41; i++) tau[i] = 0.05 * i;
    SqdSimParams p = {0.5, 1.3, 0.1745, 5.7, 6, SQD_TRANSITION_PLUS, 2.0};
    SqdSpectrogram *s = NULL;
    if (sqd_simulate(c, &p, f, 3, tau, 41, &s) != SQD_STATUS_OK) return 14;
    size_t nt = 0, nf = 0;
    sqd_spectrogram_shape(s, &nt, &nf);
    double buf[123];
    if (nt * nf != 123 || sqd_spectrogram_copy(s, buf, 123) != SQD_STATUS_OK) return 15;
    if (fabs(buf[1] - 1.0) > 1e-9) return 16; /* rho_00(0) = 1 */

    double ssim = 0.0;
    if (sqd_ssim(buf, buf, nt, nf, false, &ssim) != SQD_STATUS_OK || fabs(ssim - 1.0) > 1e-12) return 17;

    sqd_spectrogram_free(s);
    sqd_circuit_free(c);
    sqd_circuit_free(NULL);
    return 0;
}
