#include <stdio.h>
#include <math.h>
#include "assortment.h"

static const char *THREE =
    "{\"schema_version\":\"1\",\"products\":["
    "{\"id\":1,\"weight\":\"1.0\",\"price\":\"10.0\"},"
    "{\"id\":2,\"weight\":\"2.0\",\"price\":\"6.0\"},"
    "{\"id\":3,\"weight\":\"0.5\",\"price\":\"12.0\"}]}";

int main(void) {
    AsmInstance *inst = NULL;
    if (asm_instance_from_json(THREE, &inst) != ASM_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", asm_last_error_message());
        return 1;
    }
    AsmSolveOptions opts = {0, 2, 3, ASM_NOISE_MODE_NONE, 0.0, 0, false, false};
    AsmReport *report = NULL;
    if (asm_solve(inst, &opts, &report) != ASM_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", asm_last_error_message());
        return 1;
    }
    uint32_t ids[3];
    uintptr_t len = 0;
    asm_report_assortment(report, ids, 3, &len);
    double revenue = asm_report_revenue(report);
    printf("revenue %.6f size %lu\n", revenue, (unsigned long)len);
    int ok = fabs(revenue - 6.4) < 1e-12 && len == 2 && ids[0] == 1 && ids[1] == 3;
    asm_report_free(report);
    asm_instance_free(inst);
    return ok ? 0 : 2;
}
