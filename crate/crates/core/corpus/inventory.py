import json
from dataclasses import dataclass, field


@dataclass
class Item:
    sku: str
    name: str
    quantity: int = 0
    tags: list = field(default_factory=list)

    def restock(self, amount):
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.quantity += amount
        return self.quantity


class Inventory:
    def __init__(self, warehouse):
        self.warehouse = warehouse
        self.items = {}

    def add(self, item):
        if item.sku in self.items:
            raise KeyError(f"duplicate sku {item.sku}")
        self.items[item.sku] = item

    def remove(self, sku, amount=1):
        item = self.items[sku]
        if item.quantity < amount:
            return False
        item.quantity -= amount
        return True

    def low_stock(self, threshold=5):
        return sorted(
            (i for i in self.items.values() if i.quantity < threshold),
            key=lambda item: item.quantity,
        )

    def to_json(self):
        payload = {sku: vars(item) for sku, item in self.items.items()}
        return json.dumps({"warehouse": self.warehouse, "items": payload})


def load(path):
    with open(path) as handle:
        raw = json.load(handle)
    inventory = Inventory(raw["warehouse"])
    for sku, fields in raw["items"].items():
        rest = {k: v for k, v in fields.items() if k != "sku"}
        inventory.add(Item(sku=sku, **rest))
    return inventory
