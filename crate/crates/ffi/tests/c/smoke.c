#include <stdio.h>
#include <string.h>
#include "panogen.h"

int main(int argc, char **argv) {
    if (argc != 4) {
        fprintf(stderr, "usage: smoke RUN_DIR INPUT_PNG EXPORT_DIR\n");
        return 64;
    }
    const char *config = "{\"view_size\": 32}";
    PanogenRun *run = NULL;
    PanogenStatus s = panogen_run_init(argv[1], argv[2], 0.0, 0.0, 90.0, 128, "a meadow", config, &run);
    if (s != PANOGEN_STATUS_OK) {
        fprintf(stderr, "init: %s\n", panogen_last_error());
        return 1;
    }
    if (panogen_run_export(run, argv[3]) != PANOGEN_STATUS_STATE) {
        return 2;
    }
    uint32_t taken = 0;
    if (panogen_run_auto(run, 0, &taken) != PANOGEN_STATUS_OK || taken == 0) {
        fprintf(stderr, "auto: %s\n", panogen_last_error());
        return 3;
    }
    double known = 0.0;
    panogen_run_known_fraction(run, &known);
    if (known != 1.0) {
        return 4;
    }
    if (panogen_run_export(run, argv[3]) != PANOGEN_STATUS_OK) {
        return 5;
    }
    char *manifest = panogen_run_manifest_json(run);
    int ok = manifest != NULL && strstr(manifest, "\"complete\":true") != NULL;
    panogen_string_free(manifest);
    panogen_run_free(run);
    printf("steps=%u\n", taken);
    return ok ? 0 : 6;
}
