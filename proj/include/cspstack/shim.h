/*
 * C interface of the replacement CAN receive path.
 *
 * A host library that drops its own csp_can2_rx() declares it extern, links
 * against libcspstack_shim and calls csp_shim_init() once at start-up. From
 * then on every raw CAN frame goes to csp_can2_rx(); reassembled packets come
 * back through the host's enqueue_packet callback.
 *
 * The shim holds one static engine (csp_can2_rx has no instance argument),
 * never allocates, never performs I/O, and never lets an exception escape.
 * Calls must be serialized by the host.
 */
#ifndef CSPSTACK_SHIM_H
#define CSPSTACK_SHIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* csp_can2_rx return codes. */
#define CSP_SHIM_OK 0
#define CSP_SHIM_EINVAL (-1)   /* dlc > 8, NULL data with dlc > 0, or not initialized */
#define CSP_SHIM_ENOBUFS (-2)  /* host acquire_buffer returned NULL */
#define CSP_SHIM_EDROP (-3)    /* frame rejected by reassembly (any other reason) */

/* csp_shim_init return codes. */
#define CSP_SHIM_EALREADY (-4) /* already initialized */

/* Opaque to the shim; passed through unchanged. */
typedef struct csp_iface_s csp_iface_t;

/*
 * Host callbacks.
 *
 * acquire_buffer returns a token, or NULL when the host is out of buffers.
 * A token is the address of host-owned storage of at least
 * csp_shim_config_t.max_data_len writable bytes; the shim writes payload
 * bytes there and nowhere else.
 *
 * Each token is handed back exactly once: either through release_buffer, or
 * through enqueue_packet together with the payload length and the 32-bit
 * CSP header word. After enqueue_packet the host owns the token again.
 */
typedef struct csp_shim_host_env_s {
    void *(*acquire_buffer)(void *context);
    void (*release_buffer)(void *context, void *token);
    void (*enqueue_packet)(void *context, void *token, uint16_t length, uint32_t header);
    void *context;
} csp_shim_host_env_t;

typedef struct csp_shim_config_s {
    uint16_t max_data_len;          /* <= 2042 */
    uint16_t rx_slot_count;         /* 1..16 */
    uint32_t reassembly_timeout_ms;
} csp_shim_config_t;

/* 0, CSP_SHIM_EINVAL (NULL callback or bad config) or CSP_SHIM_EALREADY. */
int32_t csp_shim_init(const csp_shim_host_env_t *env, const csp_shim_config_t *cfg);

/* The replaced receive function. task_woken may be NULL; when given it is set to 0. */
int32_t csp_can2_rx(csp_iface_t *iface, uint32_t id, const uint8_t *data, uint8_t dlc,
                    int *task_woken);

/* Advances the shim clock and evicts stalled streams. Returns the count evicted. */
uint32_t csp_shim_tick(uint64_t now_ms);

/* Releases every held token and returns the shim to the uninitialized state. */
void csp_shim_shutdown(void);

#ifdef __cplusplus
}
#endif

#endif /* CSPSTACK_SHIM_H */
