#include <stdio.h>
#include "dml.h"

int main(void) {
    DmlLaser *laser = NULL;
    if (dml_laser_default(&laser) != DML_STATUS_OK) return 1;

    double i_th = 0.0;
    if (dml_laser_threshold_current(laser, &i_th) != DML_STATUS_OK || !(i_th > 0.0)) return 2;

    double input[64], power[64];
    for (int i = 0; i < 64; i++) input[i] = (i / 16) % 2 ? 1.0 : 0.0;
    if (dml_simulate(laser, input, 64, 0.5, 16, power) != DML_STATUS_OK) return 3;

    if (dml_simulate(laser, input, 64, -1.0, 16, power) != DML_STATUS_VALIDATION) return 4;
    if (dml_last_error_message() == NULL) return 5;

    dml_laser_free(laser);
    dml_laser_free(NULL);
    printf("%s %.6f\n", dml_version(), power[40]);
    return 0;
}
