#include <math.h>
#include <stdio.h>
#include <string.h>

#include "archetype.h"

static const char *MODEL =
    "{\"provider\":{\"provider\":\"test\",\"dim\":2,\"version\":\"1\"},"
    "\"weight\":0.5,\"norm\":\"l2\",\"centroids\":{";

int main(int argc, char **argv) {
    ArchModel *model = NULL;
    if (argc < 2) {
        return 2;
    }
    if (arch_model_load(argv[1], &model) != ARCH_STATUS_OK) {
        fprintf(stderr, "load: %s\n", arch_last_error_message());
        return 1;
    }
    double v[2] = {0.25, 0.25};
    ArchLabel label;
    if (arch_model_classify(model, v, 2, &label) != ARCH_STATUS_OK) {
        return 1;
    }
    printf("%s %d %.6f\n", arch_section_type_name((size_t)label.nearest), label.section_type,
           label.distance);
    arch_model_free(model);

    ArchModel *broken = NULL;
    if (arch_model_from_json(MODEL, &broken) != ARCH_STATUS_PARSE || broken != NULL) {
        return 1;
    }

    char *norm = NULL;
    if (arch_normalize_heading("III. Summary", &norm) != ARCH_STATUS_OK) {
        return 1;
    }
    printf("%s\n", norm);
    arch_string_free(norm);

    ArchEmbedder *e = NULL;
    double buf[16];
    if (arch_embedder_new_hash(16, 0, &e) != ARCH_STATUS_OK ||
        arch_embedder_embed(e, "text", buf, 16) != ARCH_STATUS_OK) {
        return 1;
    }
    double s = 0.0;
    for (int i = 0; i < 16; i++) {
        s += buf[i] * buf[i];
    }
    printf("%.6f\n", sqrt(s));
    arch_embedder_free(e);
    return 0;
}
