#include <stdio.h>
#include <string.h>
#include "texfuse.h"

#define CHECK(expr)                                                   \
    do {                                                              \
        TfStatus s_ = (expr);                                         \
        if (s_ != TF_STATUS_OK) {                                     \
            char msg_[256];                                           \
            tf_last_error(msg_, sizeof msg_, NULL);                   \
            fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, msg_);  \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    TfMesh *mesh = NULL;
    TfTexture *texture = NULL;
    size_t vertices = 0, faces = 0;
    static uint8_t view[48 * 48 * 3];
    double value = 0.0;
    char prompt[256];

    CHECK(tf_mesh_generate("uv_sphere", 8, &mesh));
    CHECK(tf_mesh_counts(mesh, &vertices, &faces));
    CHECK(tf_texture_pattern("checker", 32, &texture));
    CHECK(tf_render_view(mesh, texture, 90.0, 48, view, sizeof view));
    CHECK(tf_psnr(view, view, 48, 48, &value));
    if (value != 99.0) return 2;
    CHECK(tf_view_prompt(-45.0, prompt, sizeof prompt, NULL));
    if (strstr(prompt, "right view") == NULL) return 3;

    if (tf_mesh_generate("torus", 8, &mesh) != TF_STATUS_INVALID_ARGUMENT) return 4;
    tf_texture_free(texture);
    tf_mesh_free(mesh);
    printf("%s %zu %zu\n", tf_version(), vertices, faces);
    return 0;
}
