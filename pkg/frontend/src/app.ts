/**
 * Browser shell: three.js rendering plus DOM controls around the headless
 * ConsoleSession core. Drag the coil to move it on the scalp-tangent
 * plane, shift-drag to spin it about its axis, drag empty space to orbit
 * the camera; the matrix box snaps the coil to an exact pose.
 */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import type { LegendModel } from "./colormap.js";
import { dragRotate, dragTranslate } from "./gestures.js";
import { decodeMeshBinary, type MeshData } from "./mesh.js";
import type { AcceptedOverlay } from "./overlay.js";
import type { SceneMsg } from "./protocol.js";
import { formatMatrix, IDENTITY, type Mat16 } from "./rigid.js";
import { ConsoleSession } from "./session.js";

const HEAD_CENTER = new THREE.Vector3(0, 0, 105);

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function mat16ToThree(m: Mat16): THREE.Matrix4 {
  return new THREE.Matrix4().set(
    m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7],
    m[8], m[9], m[10], m[11], m[12], m[13], m[14], m[15]);
}

function meshToGeometry(data: MeshData): THREE.BufferGeometry {
  const geo = new THREE.BufferGeometry();
  geo.setAttribute("position", new THREE.BufferAttribute(data.positions, 3));
  geo.setIndex(new THREE.BufferAttribute(data.indices, 1));
  geo.computeVertexNormals();
  return geo;
}

class ConsoleApp {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly controls: OrbitControls;
  private readonly raycaster = new THREE.Raycaster();
  private session!: ConsoleSession;
  private ws!: WebSocket;
  private brain: THREE.Mesh | null = null;
  private coil: THREE.Group | null = null;
  private colorAttr: THREE.BufferAttribute | null = null;
  private gesture: { mode: "move" | "spin"; lastX: number; lastY: number } | null = null;

  constructor(private readonly container: HTMLElement) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(45, 1, 1, 5000);
    this.camera.position.set(0, -320, 60);
    this.camera.up.set(0, 0, 1);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.target.copy(HEAD_CENTER);
    this.scene.background = new THREE.Color(0x10141c);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const key = new THREE.DirectionalLight(0xffffff, 1.4);
    key.position.set(-150, -250, 200);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899ff, 0.5);
    fill.position.set(200, 100, -100);
    this.scene.add(fill);
    this.resize();
    window.addEventListener("resize", () => this.resize());
    this.bindPointer();
    this.bindForm();
    this.connect();
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  private resize(): void {
    const w = this.container.clientWidth;
    const h = this.container.clientHeight;
    this.renderer.setSize(w, h);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  private connect(): void {
    const url = `ws://${location.host}/`;
    this.ws = new WebSocket(url);
    this.ws.binaryType = "arraybuffer";
    this.session = new ConsoleSession(
      { send: (d) => this.ws.readyState === WebSocket.OPEN && this.ws.send(d) },
      {
        onScene: (scene) => void this.loadScene(scene),
        onOverlay: (ov, colors, legend) => this.applyOverlay(ov, colors, legend),
        onHud: () => this.refreshHud(),
        onPose: (pose) => this.placeCoil(pose),
        onWarning: (active, msg) => this.setBadge(active ? msg : "live", !active),
        onServerError: (msg) => this.inlineError(msg),
      },
    );
    this.ws.onopen = () => {
      this.session.setConnected(true);
      this.setBadge("live", true);
    };
    this.ws.onclose = () => {
      this.session.setConnected(false);
      this.setBadge("disconnected - retrying", false);
      setTimeout(() => this.connect(), 1500);
    };
    this.ws.onmessage = (ev) => this.session.handleMessage(ev.data);
  }

  private async loadScene(scene: SceneMsg): Promise<void> {
    const fetchMesh = async (url: string) => {
      const buf = await (await fetch(url)).arrayBuffer();
      const data = decodeMeshBinary(buf);
      if (!data) throw new Error(`bad mesh payload from ${url}`);
      return data;
    };
    const brainData = await fetchMesh(scene.mesh_url);
    if (this.brain) this.scene.remove(this.brain);
    const geo = meshToGeometry(brainData);
    const colors = new Float32Array(brainData.positions.length).fill(0.45);
    this.colorAttr = new THREE.BufferAttribute(colors, 3);
    geo.setAttribute("color", this.colorAttr);
    this.brain = new THREE.Mesh(
      geo,
      new THREE.MeshLambertMaterial({ vertexColors: true }),
    );
    this.scene.add(this.brain);

    if (scene.coil_url && !this.coil) {
      const coilData = await fetchMesh(scene.coil_url);
      const coilGeo = meshToGeometry(coilData);
      const body = new THREE.Mesh(
        coilGeo,
        new THREE.MeshStandardMaterial({
          color: 0x2f9e44, roughness: 0.5, side: THREE.DoubleSide,
        }),
      );
      this.coil = new THREE.Group();
      this.coil.add(body);
      this.coil.matrixAutoUpdate = false;
      this.scene.add(this.coil);
      this.placeCoil(this.session.coilPose);
    }
    this.setBadge("live", true);
  }

  private placeCoil(pose: Mat16): void {
    if (!this.coil) return;
    this.coil.matrix.copy(mat16ToThree(pose));
    this.coil.matrixWorldNeedsUpdate = true;
    ($("matrix") as HTMLTextAreaElement).value = formatMatrix(pose);
  }

  private applyOverlay(ov: AcceptedOverlay, colors: Float32Array, legend: LegendModel): void {
    if (this.colorAttr) {
      (this.colorAttr.array as Float32Array).set(colors);
      this.colorAttr.needsUpdate = true;
    }
    $("legend-min").textContent = `${legend.minLabel} ${legend.units}`;
    $("legend-max").textContent = `${legend.maxLabel} ${legend.units}`;
    $("legend-bar").style.background = legend.gradientCss;
    $("run-id").textContent = `run ${ov.runId}`;
  }

  private refreshHud(): void {
    const v = this.session.hud.view();
    $("hud-last").textContent = `predict ${v.lastCompute} · vis ${v.lastVis}`;
    $("hud-mean").textContent =
      `mean(${v.runs}) predict ${v.meanCompute} · vis ${v.meanVis}`;
  }

  private setBadge(text: string, ok: boolean): void {
    const badge = $("badge");
    badge.textContent = text;
    badge.className = ok ? "badge ok" : "badge warn";
  }

  private inlineError(msg: string): void {
    const box = $("matrix-error");
    box.textContent = msg;
    if (msg) setTimeout(() => (box.textContent = ""), 4000);
  }

  private bindForm(): void {
    ($("matrix") as HTMLTextAreaElement).value = formatMatrix(IDENTITY);
    $("apply").addEventListener("click", () => {
      const text = ($("matrix") as HTMLTextAreaElement).value;
      const res = this.session.enterMatrix(text);
      this.inlineError(res.ok ? "" : res.error ?? "invalid matrix");
    });
  }

  private bindPointer(): void {
    const el = this.renderer.domElement;
    el.addEventListener("pointerdown", (ev) => {
      if (!this.coil) return;
      const rect = el.getBoundingClientRect();
      const ndc = new THREE.Vector2(
        ((ev.clientX - rect.left) / rect.width) * 2 - 1,
        -((ev.clientY - rect.top) / rect.height) * 2 + 1,
      );
      this.raycaster.setFromCamera(ndc, this.camera);
      const hit = this.raycaster.intersectObject(this.coil, true);
      if (!hit.length) return; // empty space: OrbitControls owns the drag
      this.controls.enabled = false;
      this.gesture = {
        mode: ev.shiftKey ? "spin" : "move",
        lastX: ev.clientX,
        lastY: ev.clientY,
      };
      el.setPointerCapture(ev.pointerId);
    });
    el.addEventListener("pointermove", (ev) => {
      if (!this.gesture) return;
      const dx = ev.clientX - this.gesture.lastX;
      const dy = ev.clientY - this.gesture.lastY;
      this.gesture.lastX = ev.clientX;
      this.gesture.lastY = ev.clientY;
      this.session.dragUpdate(this.nextPose(dx, dy));
    });
    const finish = (ev: PointerEvent) => {
      if (!this.gesture) return;
      this.gesture = null;
      this.controls.enabled = true;
      el.releasePointerCapture(ev.pointerId);
      this.session.dragEnd(this.session.coilPose);
    };
    el.addEventListener("pointerup", finish);
    el.addEventListener("pointercancel", finish);
  }

  /** Screen delta -> pose update: move across the scalp-tangent plane or
   * spin about the coil axis, depending on the gesture mode. */
  private nextPose(dx: number, dy: number): Mat16 {
    const pose = this.session.coilPose;
    if (this.gesture?.mode === "spin") {
      return dragRotate(pose, dx * 0.01);
    }
    const pos = new THREE.Vector3(pose[3], pose[7], pose[11]);
    const normal = pos.clone().sub(HEAD_CENTER).normalize();
    const right = new THREE.Vector3(1, 0, 0)
      .applyQuaternion(this.camera.quaternion);
    return dragTranslate(
      pose,
      [normal.x, normal.y, normal.z],
      [right.x, right.y, right.z],
      dx, -dy, 0.35,
    );
  }
}

new ConsoleApp($("viewport"));
