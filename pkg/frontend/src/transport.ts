/**
 * Transport abstraction: something that moves whole record payloads.
 *
 * The browser build uses a WebSocket (one binary message per record, no
 * length prefix); the test harness plugs in a TCP transport built on
 * node:net with the 4-byte framing. The client only ever sees de-framed
 * payload bytes, so both paths share every line of protocol handling.
 */

export interface Transport {
  send(payload: Uint8Array): void;
  close(): void;
}

export interface TransportHandlers {
  onOpen(): void;
  onRecord(payload: Uint8Array): void;
  onClose(reason: string): void;
}

export type TransportFactory = (handlers: TransportHandlers) => Transport;

export function wsTransportFactory(url: string): TransportFactory {
  return (handlers) => {
    const ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";
    let closed = false;
    const closeOnce = (reason: string) => {
      if (!closed) {
        closed = true;
        handlers.onClose(reason);
      }
    };
    ws.onopen = () => handlers.onOpen();
    ws.onmessage = (ev) => {
      if (!(ev.data instanceof ArrayBuffer)) {
        console.warn("ignoring non-binary websocket message");
        return;
      }
      handlers.onRecord(new Uint8Array(ev.data));
    };
    ws.onclose = (ev) => closeOnce(`websocket closed (code ${ev.code})`);
    ws.onerror = () => {
      // the close event follows with the code; nothing to do here
    };
    return {
      send(payload: Uint8Array): void {
        if (ws.readyState !== WebSocket.OPEN) {
          console.warn("websocket not open, dropping record");
          return;
        }
        // slice() pins the view to a plain ArrayBuffer, which send() requires
        ws.send(payload.slice());
      },
      close(): void {
        ws.close();
      },
    };
  };
}
