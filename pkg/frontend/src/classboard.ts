// Token-class gallery: exemplar thumbnails, member counts, mirror flags.

import { decodeRle, gridToRgba } from "./overlay";
import type { Inventory, TokenClass } from "./types";

export class ClassBoard {
  onSelect: (classId: number) => void = () => {};

  constructor(private container: HTMLElement) {}

  render(inventory: Inventory, selected: number[]): void {
    this.container.textContent = "";
    const suggestions = new Map<number, number>();
    for (const [a, b] of inventory.mirror_suggestions ?? []) {
      suggestions.set(a, b);
      suggestions.set(b, a);
    }
    for (const cls of inventory.classes) {
      this.container.appendChild(this.card(cls, selected.includes(cls.class_id), suggestions.get(cls.class_id)));
    }
  }

  private card(cls: TokenClass, selected: boolean, suggestedMirror: number | undefined): HTMLElement {
    const card = document.createElement("div");
    card.className = "class-card" + (selected ? " selected" : "");
    card.dataset.classId = String(cls.class_id);

    const canvas = document.createElement("canvas");
    canvas.width = cls.exemplar_side;
    canvas.height = cls.exemplar_side;
    const ctx = canvas.getContext("2d");
    if (ctx) {
      const rgba = gridToRgba(decodeRle(cls.exemplar_rle));
      ctx.putImageData(new ImageData(rgba, cls.exemplar_side, cls.exemplar_side), 0, 0);
    }
    card.appendChild(canvas);

    const label = document.createElement("div");
    label.className = "class-label";
    label.textContent = cls.placeholder;
    card.appendChild(label);

    const meta = document.createElement("div");
    meta.className = "class-meta";
    const bits = [`${cls.member_refs.length} uses`];
    if (cls.mirror_of !== null) bits.push(`mirror of t${cls.mirror_of}`);
    else if (suggestedMirror !== undefined) bits.push(`mirror? t${suggestedMirror}`);
    meta.textContent = bits.join(" · ");
    card.appendChild(meta);

    card.addEventListener("click", () => this.onSelect(cls.class_id));
    return card;
  }
}
