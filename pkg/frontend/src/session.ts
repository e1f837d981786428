import { applyColormap, legendModel, type LegendModel } from "./colormap.js";
import { LatencyHud, type HudView } from "./hud.js";
import { OverlayTracker, type AcceptedOverlay } from "./overlay.js";
import {
  decodeOverlayFrame,
  encodePoseMsg,
  parseServerText,
  type FieldMeta,
  type SceneMsg,
} from "./protocol.js";
import { checkRigid, parseMatrixText, IDENTITY, type Mat16 } from "./rigid.js";
import { PoseThrottle } from "./throttle.js";

export interface SocketLike {
  send(data: string): void;
}

export interface SessionHooks {
  onScene?(scene: SceneMsg): void;
  onOverlay?(overlay: AcceptedOverlay, colors: Float32Array, legend: LegendModel): void;
  onHud?(view: HudView): void;
  onPose?(pose: Mat16): void;
  onWarning?(active: boolean, message: string): void;
  onServerError?(message: string): void;
}

export interface MatrixEntryResult {
  ok: boolean;
  error?: string;
}

/**
 * The console's headless core: one WebSocket's worth of state, no DOM and
 * no renderer. The browser shell feeds messages in and draws whatever the
 * hooks hand back; tests drive it with a scripted mock server.
 */
export class ConsoleSession {
  scene: SceneMsg | null = null;
  overlay: OverlayTracker | null = null;
  readonly hud = new LatencyHud(50);
  coilPose: Mat16 = [...IDENTITY];
  connected = true;
  private throttle: PoseThrottle;

  constructor(
    private readonly socket: SocketLike,
    private readonly hooks: SessionHooks = {},
    clock?: { now?: () => number; schedule?: (fn: () => void, ms: number) => unknown },
  ) {
    this.throttle = new PoseThrottle(
      (pose) => this.socket.send(encodePoseMsg(pose)),
      30,
      clock?.now,
      clock?.schedule,
    );
  }

  // --- inbound ---

  handleMessage(data: string | ArrayBuffer): void {
    if (typeof data === "string") {
      const msg = parseServerText(data);
      if (!msg) return;
      if (msg.type === "scene") {
        this.scene = msg as SceneMsg;
        this.overlay = new OverlayTracker(this.scene.vertex_count);
        this.hooks.onScene?.(this.scene);
      } else if (msg.type === "field_meta") {
        this.overlay?.offerMeta(msg as FieldMeta);
      } else if (msg.type === "error") {
        this.hooks.onServerError?.((msg as { message?: string }).message ?? "server error");
      }
      return;
    }
    const frame = decodeOverlayFrame(data);
    if (!frame || !this.overlay) return;
    const accepted = this.overlay.offerFrame(frame);
    if (!accepted) return;
    this.hud.push(accepted.meta);
    const stops = this.scene?.colormap.stops;
    const colors = applyColormap(accepted.scalars, accepted.range, stops);
    const legend = legendModel(accepted.range, stops, this.scene?.units ?? "V/m");
    this.hooks.onOverlay?.(accepted, colors, legend);
    this.hooks.onHud?.(this.hud.view());
  }

  setConnected(up: boolean): void {
    this.connected = up;
    this.hooks.onWarning?.(!up, up ? "" : "disconnected: gestures are local only");
  }

  // --- outbound ---

  /** Mid-gesture pose update: local echo always, throttled send when
   * connected, visual-only with a warning badge when not. */
  dragUpdate(pose: Mat16): void {
    this.coilPose = pose;
    this.hooks.onPose?.(pose);
    if (this.connected) this.throttle.update(pose);
  }

  /** Gesture end: the terminal pose is always delivered. */
  dragEnd(pose: Mat16): void {
    this.coilPose = pose;
    this.hooks.onPose?.(pose);
    if (this.connected) this.throttle.finish(pose);
  }

  /**
   * Text-field matrix entry: rigidity-checked client-side with the same
   * 1e-3 tolerance the server uses. Invalid input sends nothing.
   */
  enterMatrix(text: string): MatrixEntryResult {
    const matrix = parseMatrixText(text);
    if (!matrix) return { ok: false, error: "enter 16 numbers (row-major)" };
    const check = checkRigid(matrix);
    if (!check.ok) return { ok: false, error: check.reason };
    this.coilPose = matrix;
    this.hooks.onPose?.(matrix);
    if (this.connected) this.socket.send(encodePoseMsg(matrix));
    return { ok: true };
  }
}
