// Structure views for algorithm sessions: replaying algo_step records
// mechanically rebuilds the tree/heap/search state frame by frame, which is
// exactly what the canvas animates.

import type { TraceRecord } from "./types.js";

export interface TreeNode {
  key: number;
  left: TreeNode | null;
  right: TreeNode | null;
}

export class TreeView {
  root: TreeNode | null = null;
  highlight: number | null = null;
  lastOp = "";

  apply(op: string, operands: Record<string, unknown>): void {
    this.lastOp = op;
    switch (op) {
      case "compare":
      case "visit":
        this.highlight = (operands["against"] ?? operands["key"]) as number;
        break;
      case "insert": {
        const node: TreeNode = { key: operands["key"] as number, left: null, right: null };
        if (operands["parent"] == null) {
          this.root = node;
        } else {
          const parent = this.find(operands["parent"] as number);
          if (parent) {
            if (operands["side"] === "left") parent.left = node;
            else parent.right = node;
          }
        }
        this.highlight = node.key;
        break;
      }
      case "swap": {
        const a = this.find(operands["a"] as number);
        const b = this.find(operands["b"] as number);
        if (a && b) [a.key, b.key] = [b.key, a.key];
        break;
      }
      case "delete":
        this.root = this.splice(this.root, operands["key"] as number);
        break;
      case "rotate_left":
        this.root = this.rotate(this.root, operands["pivot"] as number, true);
        break;
      case "rotate_right":
        this.root = this.rotate(this.root, operands["pivot"] as number, false);
        break;
    }
  }

  private find(key: number): TreeNode | null {
    const stack: (TreeNode | null)[] = [this.root];
    while (stack.length) {
      const node = stack.pop();
      if (!node) continue;
      if (node.key === key) return node;
      stack.push(node.left, node.right);
    }
    return null;
  }

  private splice(root: TreeNode | null, key: number): TreeNode | null {
    const walk = (node: TreeNode | null): TreeNode | null => {
      if (!node) return null;
      if (node.key === key) return node.left ?? node.right;
      node.left = walk(node.left);
      node.right = walk(node.right);
      return node;
    };
    return walk(root);
  }

  private rotate(root: TreeNode | null, pivot: number, left: boolean): TreeNode | null {
    const walk = (node: TreeNode | null): TreeNode | null => {
      if (!node) return null;
      if (node.key === pivot) {
        if (left && node.right) {
          const next = node.right;
          node.right = next.left;
          next.left = node;
          return next;
        }
        if (!left && node.left) {
          const next = node.left;
          node.left = next.right;
          next.right = node;
          return next;
        }
        return node;
      }
      node.left = walk(node.left);
      node.right = walk(node.right);
      return node;
    };
    return walk(root);
  }
}

export class HeapView {
  items: number[] = [];
  highlight: [number, number] | null = null;

  apply(op: string, operands: Record<string, unknown>): void {
    switch (op) {
      case "insert":
        this.items.push(operands["key"] as number);
        this.highlight = [this.items.length - 1, this.items.length - 1];
        break;
      case "compare":
        this.highlight = [operands["i"] as number, operands["j"] as number];
        break;
      case "swap": {
        const i = operands["i"] as number;
        const j = operands["j"] as number;
        [this.items[i], this.items[j]] = [this.items[j], this.items[i]];
        this.highlight = [i, j];
        break;
      }
      case "delete":
        this.items.pop();
        this.highlight = null;
        break;
    }
  }
}

export class SearchView {
  order: number[] = [];
  dist = new Map<number, number>();
  pred = new Map<number, number>();
  frontier = new Set<number>();
  settled = new Set<number>();
  current: number | null = null;

  apply(op: string, operands: Record<string, unknown>): void {
    const v = operands["vertex"] as number | undefined;
    switch (op) {
      case "enqueue":
        if (v !== undefined) this.frontier.add(v);
        break;
      case "dequeue":
        if (v !== undefined) {
          this.frontier.delete(v);
          this.current = v;
        }
        break;
      case "emit":
        if (v !== undefined) this.order.push(v);
        break;
      case "settle":
        if (v !== undefined) {
          this.settled.add(v);
          this.dist.set(v, operands["dist"] as number);
        }
        break;
      case "relax":
        this.dist.set(operands["dst"] as number, operands["dist"] as number);
        this.pred.set(operands["dst"] as number, operands["src"] as number);
        break;
    }
  }
}

export type AlgoView =
  | { algo: "avl"; view: TreeView }
  | { algo: "heap"; view: HeapView }
  | { algo: "topo" | "dijkstra"; view: SearchView };

/** Dispatch algo_step records into per-algorithm views. */
export class AlgoPanel {
  views = new Map<string, AlgoView>();
  stepCount = 0;

  apply(rec: TraceRecord): void {
    if (rec.kind !== "algo_step") return;
    const algo = rec["algo"] as string;
    let entry = this.views.get(algo);
    if (!entry) {
      if (algo === "avl") entry = { algo, view: new TreeView() };
      else if (algo === "heap") entry = { algo, view: new HeapView() };
      else entry = { algo: algo as "topo" | "dijkstra", view: new SearchView() };
      this.views.set(algo, entry);
    }
    entry.view.apply(rec["op"] as string, (rec["operands"] ?? {}) as Record<string, unknown>);
    this.stepCount += 1;
  }
}
